//! Trainable transformer encoder.
//!
//! Pre-norm residual blocks with learned absolute position embeddings.
//! Besides per-token hidden states, the encoder exposes its own attention:
//! the pooled output is the mean of the last `min(attn_layers, layers)`
//! blocks, both for hidden states and for the head-averaged post-softmax
//! attention matrix, which stays row-stochastic by construction.

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{Tape, TensorError, TensorId};
use crate::params::{init_const, init_normal, Bound, ParamBank};

#[derive(Error, Debug)]
pub enum EncoderError {
    #[error("encoder input is empty")]
    EmptyInput,
    #[error("input length {got} exceeds max_len {max}")]
    TooLong { got: usize, max: usize },
    #[error("invalid encoder config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    /// Hidden width `d`; must divide evenly into heads.
    pub hidden: usize,
    pub layers: usize,
    pub heads: usize,
    pub ff_width: usize,
    pub max_len: usize,
    pub dropout: f64,
    /// How many final layers contribute to the pooled states and attention.
    pub attn_layers: usize,
}

impl EncoderConfig {
    /// Desk-scale defaults; `vocab_size` is corpus-dependent and must be set.
    pub fn with_vocab(vocab_size: usize) -> Self {
        EncoderConfig {
            vocab_size,
            hidden: 64,
            layers: 2,
            heads: 2,
            ff_width: 128,
            max_len: 512,
            dropout: 0.1,
            attn_layers: 3,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.hidden / self.heads
    }

    pub fn validate(&self) -> Result<(), EncoderError> {
        let bad = |m: String| Err(EncoderError::BadConfig(m));
        if self.vocab_size < 3 {
            return bad(format!("vocab_size {} below reserved ids", self.vocab_size));
        }
        if self.hidden == 0 || self.layers == 0 || self.heads == 0 || self.ff_width == 0 {
            return bad("hidden, layers, heads, ff_width must be positive".into());
        }
        if self.hidden % self.heads != 0 {
            return bad(format!(
                "hidden {} not divisible by heads {}",
                self.hidden, self.heads
            ));
        }
        if self.max_len == 0 {
            return bad("max_len must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0,1)", self.dropout));
        }
        if self.attn_layers == 0 {
            return bad("attn_layers must be positive".into());
        }
        Ok(())
    }
}

const LN_EPS: f64 = 1e-5;
const INIT_STD: f64 = 0.02;

/// Register all encoder parameters under `encoder.*`.
pub fn register_params(bank: &mut ParamBank, cfg: &EncoderConfig, root_seed: u64) {
    fn normal(bank: &mut ParamBank, root_seed: u64, name: &str, shape: Vec<usize>) {
        let len = shape.iter().product();
        bank.insert(name, shape, init_normal(root_seed, name, len, INIT_STD));
    }
    let d = cfg.hidden;
    let dh = cfg.head_dim();
    normal(bank, root_seed, "encoder.token_embedding", vec![cfg.vocab_size, d]);
    normal(bank, root_seed, "encoder.position_embedding", vec![cfg.max_len, d]);
    for l in 0..cfg.layers {
        let p = format!("encoder.layer{l}");
        for h in 0..cfg.heads {
            normal(bank, root_seed, &format!("{p}.head{h}.wq"), vec![d, dh]);
            normal(bank, root_seed, &format!("{p}.head{h}.wk"), vec![d, dh]);
            normal(bank, root_seed, &format!("{p}.head{h}.wv"), vec![d, dh]);
            bank.insert(&format!("{p}.head{h}.bq"), vec![dh], init_const(dh, 0.0));
            bank.insert(&format!("{p}.head{h}.bk"), vec![dh], init_const(dh, 0.0));
            bank.insert(&format!("{p}.head{h}.bv"), vec![dh], init_const(dh, 0.0));
        }
        normal(bank, root_seed, &format!("{p}.attn_out.w"), vec![d, d]);
        bank.insert(&format!("{p}.attn_out.b"), vec![d], init_const(d, 0.0));
        bank.insert(&format!("{p}.attn_norm.gain"), vec![d], init_const(d, 1.0));
        bank.insert(&format!("{p}.attn_norm.bias"), vec![d], init_const(d, 0.0));
        normal(bank, root_seed, &format!("{p}.ff.w1"), vec![d, cfg.ff_width]);
        bank.insert(&format!("{p}.ff.b1"), vec![cfg.ff_width], init_const(cfg.ff_width, 0.0));
        normal(bank, root_seed, &format!("{p}.ff.w2"), vec![cfg.ff_width, d]);
        bank.insert(&format!("{p}.ff.b2"), vec![d], init_const(d, 0.0));
        bank.insert(&format!("{p}.ff_norm.gain"), vec![d], init_const(d, 1.0));
        bank.insert(&format!("{p}.ff_norm.bias"), vec![d], init_const(d, 0.0));
    }
}

pub struct EncoderOutput {
    /// Pooled token states `[len, hidden]`.
    pub h: TensorId,
    /// Pooled attention `[len, len]`; rows sum to one.
    pub a: TensorId,
    pub len: usize,
}

/// Run the encoder over token ids. `dropout_rng` enables train-mode dropout;
/// `None` is deterministic evaluation.
pub fn encode(
    tape: &Tape,
    bound: &Bound,
    cfg: &EncoderConfig,
    ids: &[usize],
    mut dropout_rng: Option<&mut ChaCha20Rng>,
) -> Result<EncoderOutput, EncoderError> {
    cfg.validate()?;
    let l = ids.len();
    if l == 0 {
        return Err(EncoderError::EmptyInput);
    }
    if l > cfg.max_len {
        return Err(EncoderError::TooLong { got: l, max: cfg.max_len });
    }
    let dh = cfg.head_dim();

    let mut dropout = |tape: &Tape, x: TensorId| -> Result<TensorId, TensorError> {
        match dropout_rng.as_deref_mut() {
            Some(rng) if cfg.dropout > 0.0 => {
                let keep = 1.0 - cfg.dropout;
                let shape = tape.shape(x);
                let n: usize = shape.iter().product();
                let mask: Vec<f64> = (0..n)
                    .map(|_| if rng.gen_bool(keep) { 1.0 / keep } else { 0.0 })
                    .collect();
                let m = tape.constant(mask, shape)?;
                tape.mul(x, m)
            }
            _ => Ok(x),
        }
    };

    let tok = tape.gather_rows(bound.id("encoder.token_embedding"), ids)?;
    let positions: Vec<usize> = (0..l).collect();
    let pos = tape.gather_rows(bound.id("encoder.position_embedding"), &positions)?;
    let mut x = tape.add(tok, pos)?;
    x = dropout(tape, x)?;

    let mut layer_states = Vec::with_capacity(cfg.layers);
    let mut layer_attns = Vec::with_capacity(cfg.layers);
    for li in 0..cfg.layers {
        let p = format!("encoder.layer{li}");
        let xn = tape.layer_norm(
            x,
            bound.id(&format!("{p}.attn_norm.gain")),
            bound.id(&format!("{p}.attn_norm.bias")),
            LN_EPS,
        )?;
        let mut head_ctx = Vec::with_capacity(cfg.heads);
        let mut attn_sum: Option<TensorId> = None;
        for h in 0..cfg.heads {
            let hp = format!("{p}.head{h}");
            let q = tape.add_bias(tape.matmul(xn, bound.id(&format!("{hp}.wq")))?, bound.id(&format!("{hp}.bq")))?;
            let k = tape.add_bias(tape.matmul(xn, bound.id(&format!("{hp}.wk")))?, bound.id(&format!("{hp}.bk")))?;
            let v = tape.add_bias(tape.matmul(xn, bound.id(&format!("{hp}.wv")))?, bound.id(&format!("{hp}.bv")))?;
            let scores = tape.scale(tape.matmul(q, tape.transpose(k)?)?, 1.0 / (dh as f64).sqrt())?;
            let attn = tape.softmax(scores, 1)?;
            head_ctx.push(tape.matmul(attn, v)?);
            attn_sum = Some(match attn_sum {
                Some(s) => tape.add(s, attn)?,
                None => attn,
            });
        }
        let ctx = tape.concat_last(&head_ctx)?;
        let out = tape.add_bias(tape.matmul(ctx, bound.id(&format!("{p}.attn_out.w")))?, bound.id(&format!("{p}.attn_out.b")))?;
        let out = dropout(tape, out)?;
        x = tape.add(x, out)?;

        let fn_in = tape.layer_norm(
            x,
            bound.id(&format!("{p}.ff_norm.gain")),
            bound.id(&format!("{p}.ff_norm.bias")),
            LN_EPS,
        )?;
        let f1 = tape.relu(tape.add_bias(tape.matmul(fn_in, bound.id(&format!("{p}.ff.w1")))?, bound.id(&format!("{p}.ff.b1")))?)?;
        let f2 = tape.add_bias(tape.matmul(f1, bound.id(&format!("{p}.ff.w2")))?, bound.id(&format!("{p}.ff.b2")))?;
        let f2 = dropout(tape, f2)?;
        x = tape.add(x, f2)?;

        layer_states.push(x);
        layer_attns.push(tape.scale(attn_sum.expect("at least one head"), 1.0 / cfg.heads as f64)?);
    }

    let k = cfg.attn_layers.min(cfg.layers);
    let pool = |items: &[TensorId]| -> Result<TensorId, TensorError> {
        let last = &items[items.len() - k..];
        let mut acc = last[0];
        for &it in &last[1..] {
            acc = tape.add(acc, it)?;
        }
        tape.scale(acc, 1.0 / k as f64)
    };
    let h = pool(&layer_states)?;
    let a = pool(&layer_attns)?;
    Ok(EncoderOutput { h, a, len: l })
}
