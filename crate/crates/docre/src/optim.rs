//! Decoupled-weight-decay adaptive-moment optimizer with a linear
//! warmup-then-decay schedule and two learning-rate groups: parameter
//! names under `encoder.` use the encoder rate, everything else the
//! classifier rate. All arithmetic is plain f64 in name order, so a step
//! is bit-reproducible given the same inputs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::{GradBank, ParamBank};

pub const ENCODER_GROUP_PREFIX: &str = "encoder.";

#[derive(Error, Debug)]
pub enum OptimError {
    #[error("invalid optimizer config: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub lr_encoder: f64,
    pub lr_classifier: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled decay; applied directly to weights, not through moments.
    pub weight_decay: f64,
    pub warmup_steps: usize,
    pub total_steps: usize,
}

impl OptimConfig {
    pub fn new(lr_encoder: f64, lr_classifier: f64, warmup_steps: usize, total_steps: usize) -> Self {
        OptimConfig {
            lr_encoder,
            lr_classifier,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            warmup_steps,
            total_steps,
        }
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        if self.lr_encoder < 0.0 || self.lr_classifier < 0.0 {
            return Err(OptimError::BadConfig("learning rates must be nonnegative".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(OptimError::BadConfig("moment decays must lie in [0,1)".into()));
        }
        if self.eps <= 0.0 {
            return Err(OptimError::BadConfig("eps must be positive".into()));
        }
        if self.total_steps == 0 || self.warmup_steps > self.total_steps {
            return Err(OptimError::BadConfig(format!(
                "need 0 < total_steps and warmup_steps <= total_steps, got warmup {} total {}",
                self.warmup_steps, self.total_steps
            )));
        }
        Ok(())
    }

    /// Schedule multiplier for the step about to be taken (0-indexed):
    /// linear ramp over the warmup, then linear decay to zero.
    pub fn lr_factor(&self, step: usize) -> f64 {
        if step < self.warmup_steps {
            (step + 1) as f64 / self.warmup_steps as f64
        } else if step >= self.total_steps {
            0.0
        } else {
            let span = (self.total_steps - self.warmup_steps) as f64;
            (self.total_steps - step) as f64 / span
        }
    }

    fn base_lr(&self, name: &str) -> f64 {
        if name.starts_with(ENCODER_GROUP_PREFIX) {
            self.lr_encoder
        } else {
            self.lr_classifier
        }
    }
}

pub struct AdamW {
    cfg: OptimConfig,
    m: BTreeMap<String, Vec<f64>>,
    v: BTreeMap<String, Vec<f64>>,
    step: usize,
}

impl AdamW {
    pub fn new(cfg: OptimConfig, bank: &ParamBank) -> Result<Self, OptimError> {
        cfg.validate()?;
        let zeros: BTreeMap<String, Vec<f64>> = bank
            .iter()
            .map(|(n, t)| (n.clone(), vec![0.0; t.values.len()]))
            .collect();
        Ok(AdamW {
            cfg,
            m: zeros.clone(),
            v: zeros,
            step: 0,
        })
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    /// Learning-rate multiplier that the next `step` call will use.
    pub fn next_factor(&self) -> f64 {
        self.cfg.lr_factor(self.step)
    }

    pub fn step(&mut self, bank: &mut ParamBank, grads: &GradBank) {
        let factor = self.cfg.lr_factor(self.step);
        let t = (self.step + 1) as i32;
        let bc1 = 1.0 - self.cfg.beta1.powi(t);
        let bc2 = 1.0 - self.cfg.beta2.powi(t);
        let names: Vec<String> = bank.names();
        for name in names {
            let g = grads.get(&name);
            let m = self.m.get_mut(&name).expect("moment for parameter");
            let v = self.v.get_mut(&name).expect("moment for parameter");
            let lr = factor * self.cfg.base_lr(&name);
            let wd = self.cfg.weight_decay;
            let p = &mut bank.get_mut(&name).values;
            for i in 0..p.len() {
                m[i] = self.cfg.beta1 * m[i] + (1.0 - self.cfg.beta1) * g[i];
                v[i] = self.cfg.beta2 * v[i] + (1.0 - self.cfg.beta2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p[i] -= lr * (mhat / (vhat.sqrt() + self.cfg.eps) + wd * p[i]);
            }
        }
        self.step += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_param_bank() -> ParamBank {
        let mut bank = ParamBank::new();
        bank.insert("encoder.w", vec![2], vec![1.0, -2.0]);
        bank.insert("core.w", vec![2], vec![0.5, 0.5]);
        bank
    }

    fn grads_of(values: &[(&str, Vec<f64>)]) -> GradBank {
        GradBank::from_map(
            values
                .iter()
                .map(|(n, v)| (n.to_string(), v.clone()))
                .collect(),
        )
    }

    #[test]
    fn single_step_matches_hand_computation() {
        let mut bank = two_param_bank();
        let grads = grads_of(&[("encoder.w", vec![0.1, -0.2]), ("core.w", vec![0.3, 0.0])]);
        let cfg = OptimConfig::new(0.01, 0.1, 0, 10);
        let mut opt = AdamW::new(cfg.clone(), &bank).unwrap();
        opt.step(&mut bank, &grads);

        // hand-run the same arithmetic
        let hand = |p0: f64, g: f64, lr: f64| -> f64 {
            let m = 0.1 * g;
            let v = 0.001 * g * g;
            let mhat = m / 0.1;
            let vhat = v / 0.001;
            p0 - lr * 1.0 * (mhat / (vhat.sqrt() + 1e-8))
        };
        let enc = &bank.get("encoder.w").values;
        assert!((enc[0] - hand(1.0, 0.1, 0.01)).abs() < 1e-15);
        assert!((enc[1] - hand(-2.0, -0.2, 0.01)).abs() < 1e-15);
        let core = &bank.get("core.w").values;
        assert!((core[0] - hand(0.5, 0.3, 0.1)).abs() < 1e-15);
        // zero gradient still leaves the value untouched at eps scale
        assert!((core[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_learning_rate_is_a_null_step() {
        let mut bank = two_param_bank();
        let before: Vec<f64> = bank.iter().flat_map(|(_, t)| t.values.clone()).collect();
        let grads = grads_of(&[("encoder.w", vec![5.0, 5.0]), ("core.w", vec![5.0, 5.0])]);
        let mut opt = AdamW::new(OptimConfig::new(0.0, 0.0, 1, 4), &bank).unwrap();
        for _ in 0..4 {
            opt.step(&mut bank, &grads);
        }
        let after: Vec<f64> = bank.iter().flat_map(|(_, t)| t.values.clone()).collect();
        let same = before.iter().zip(&after).all(|(a, b)| a.to_bits() == b.to_bits());
        assert!(same, "zero lr must leave parameters bit-identical");
    }

    #[test]
    fn steps_are_bit_reproducible() {
        let run = || {
            let mut bank = two_param_bank();
            let grads = grads_of(&[("encoder.w", vec![0.7, 0.1]), ("core.w", vec![-0.3, 0.9])]);
            let mut opt = AdamW::new(OptimConfig::new(0.05, 0.2, 2, 6), &bank).unwrap();
            for _ in 0..6 {
                opt.step(&mut bank, &grads);
            }
            bank.iter()
                .flat_map(|(_, t)| t.values.iter().map(|x| x.to_bits()))
                .collect::<Vec<u64>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn schedule_ramps_then_decays_to_zero() {
        let cfg = OptimConfig::new(1.0, 1.0, 4, 10);
        let factors: Vec<f64> = (0..10).map(|t| cfg.lr_factor(t)).collect();
        for w in factors[..4].windows(2) {
            assert!(w[1] > w[0]);
        }
        assert!((factors[3] - 1.0).abs() < 1e-12);
        for w in factors[4..].windows(2) {
            assert!(w[1] < w[0]);
        }
        assert!((factors[9] - 1.0 / 6.0).abs() < 1e-12);
        assert_eq!(cfg.lr_factor(10), 0.0);
    }

    #[test]
    fn decoupled_decay_shrinks_weights_without_touching_moments() {
        let mut bank = ParamBank::new();
        bank.insert("core.w", vec![1], vec![2.0]);
        let grads = GradBank::zeros_like(&bank);
        let mut cfg = OptimConfig::new(0.1, 0.1, 0, 5);
        cfg.weight_decay = 0.5;
        let mut opt = AdamW::new(cfg, &bank).unwrap();
        opt.step(&mut bank, &grads);
        // zero grad: pure decay, p = 2.0 - 0.1*1.0*(0 + 0.5*2.0) = 1.9
        let got = bank.get("core.w").values[0];
        assert!((got - 1.9).abs() < 1e-12);
    }

    #[test]
    fn bad_configs_are_rejected() {
        let bank = two_param_bank();
        let mut cfg = OptimConfig::new(0.1, 0.1, 5, 4);
        assert!(AdamW::new(cfg.clone(), &bank).is_err());
        cfg.total_steps = 10;
        cfg.beta1 = 1.0;
        assert!(AdamW::new(cfg, &bank).is_err());
    }
}
