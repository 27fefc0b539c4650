//! Named parameter storage.
//!
//! All trainable state lives in a [`ParamBank`]: a sorted map from dotted
//! names to dense `f64` tensors. Each forward pass binds the bank onto a
//! fresh tape (differentiably for training, frozen for inference) and reads
//! gradients back out by name. Initialization draws every tensor from its
//! own seed stream (`init.<name>`), so adding or reordering parameters never
//! shifts another tensor's values.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha20Rng;

use crate::autodiff::{Tape, TensorId};
use crate::seeding::stream;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensor {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamBank {
    entries: BTreeMap<String, ParamTensor>,
}

impl ParamBank {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, shape: Vec<usize>, values: Vec<f64>) {
        assert_eq!(
            values.len(),
            shape.iter().product::<usize>(),
            "parameter {name}: value length does not match shape"
        );
        assert!(
            self.entries
                .insert(name.to_string(), ParamTensor { shape, values })
                .is_none(),
            "parameter {name} registered twice"
        );
    }

    pub fn get(&self, name: &str) -> &ParamTensor {
        self.entries
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn get_mut(&mut self, name: &str) -> &mut ParamTensor {
        self.entries
            .get_mut(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    /// Sorted-name iteration; the only iteration order used anywhere.
    pub fn iter(&self) -> impl Iterator<Item = (&String, &ParamTensor)> {
        self.entries.iter()
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_values(&self) -> usize {
        self.entries.values().map(|t| t.values.len()).sum()
    }

    /// Bind every tensor onto the tape as a differentiable parameter.
    pub fn bind(&self, tape: &Tape) -> Bound {
        self.bind_inner(tape, true)
    }

    /// Bind as constants: same graph, no gradient bookkeeping.
    pub fn bind_frozen(&self, tape: &Tape) -> Bound {
        self.bind_inner(tape, false)
    }

    fn bind_inner(&self, tape: &Tape, differentiable: bool) -> Bound {
        let mut map = BTreeMap::new();
        for (name, tensor) in &self.entries {
            let id = if differentiable {
                tape.param(tensor.values.clone(), tensor.shape.clone())
            } else {
                tape.constant(tensor.values.clone(), tensor.shape.clone())
            }
            .expect("parameter tensor shape");
            map.insert(name.clone(), id);
        }
        Bound { map }
    }
}

/// Tape handles for one bound parameter bank.
pub struct Bound {
    map: BTreeMap<String, TensorId>,
}

impl Bound {
    /// Assemble a binding by hand; test scaffolding for partial rebinds.
    pub fn from_map(map: BTreeMap<String, TensorId>) -> Self {
        Bound { map }
    }

    pub fn id(&self, name: &str) -> TensorId {
        *self
            .map
            .get(name)
            .unwrap_or_else(|| panic!("parameter {name} not bound"))
    }

    /// Collect gradients after a backward sweep; zero vectors where a
    /// parameter did not participate in the graph.
    pub fn grads(&self, tape: &Tape, bank: &ParamBank) -> GradBank {
        let mut map = BTreeMap::new();
        for (name, &id) in &self.map {
            let g = tape
                .grad(id)
                .unwrap_or_else(|| vec![0.0; bank.get(name).values.len()]);
            map.insert(name.clone(), g);
        }
        GradBank { map }
    }
}

/// Gradients keyed like the bank that produced them.
#[derive(Debug, Clone, Default)]
pub struct GradBank {
    map: BTreeMap<String, Vec<f64>>,
}

impl GradBank {
    pub fn from_map(map: BTreeMap<String, Vec<f64>>) -> Self {
        GradBank { map }
    }

    pub fn zeros_like(bank: &ParamBank) -> Self {
        let map = bank
            .iter()
            .map(|(n, t)| (n.clone(), vec![0.0; t.values.len()]))
            .collect();
        GradBank { map }
    }

    pub fn get(&self, name: &str) -> &[f64] {
        self.map
            .get(name)
            .unwrap_or_else(|| panic!("unknown gradient {name}"))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Vec<f64>)> {
        self.map.iter()
    }

    pub fn add_assign(&mut self, other: &GradBank) {
        for (name, g) in &mut self.map {
            let o = &other.map[name];
            for (gi, oi) in g.iter_mut().zip(o) {
                *gi += oi;
            }
        }
    }

    pub fn scale(&mut self, c: f64) {
        for g in self.map.values_mut() {
            for gi in g.iter_mut() {
                *gi *= c;
            }
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.map
            .values()
            .flat_map(|g| g.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    /// Scale all gradients so the global norm is at most `max_norm`.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            self.scale(max_norm / norm);
        }
        norm
    }
}

// ── initialization ───────────────────────────────────────────────────────────

/// Gaussian init from the tensor's own named stream.
pub fn init_normal(root_seed: u64, name: &str, len: usize, std: f64) -> Vec<f64> {
    let mut rng = stream(root_seed, &format!("init.{name}"));
    (0..len).map(|_| gaussian(&mut rng) * std).collect()
}

pub fn init_const(len: usize, value: f64) -> Vec<f64> {
    vec![value; len]
}

/// Box-Muller standard normal; two uniforms per draw, second discarded.
fn gaussian(rng: &mut ChaCha20Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
