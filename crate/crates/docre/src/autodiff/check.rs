//! Finite-difference gradient verification.
//!
//! Central differences with step `1e-5`; error metric per coordinate is
//! `|analytic - numeric| / max(1e-4, |analytic| + |numeric|)`. The floor makes
//! the test absolute below gradient magnitude 1e-4: a central difference of an
//! O(1)-valued function carries ~1e-11 roundoff, so demanding four relative
//! digits of a 1e-9 gradient would reject correct derivatives. Checks sample
//! inputs away from operator kinks (relu at 0, clamp at its threshold) so the
//! two-sided difference is valid. `-inf` mask coordinates are exempt from
//! perturbation: their analytic gradient must be exactly zero instead.

use rand::Rng;
use rand_chacha::ChaCha20Rng;

use super::{Tape, TensorError, TensorId};

pub const DEFAULT_STEP: f64 = 1e-5;
pub const DEFAULT_TOL: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub per_input: Vec<f64>,
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-4)
}

/// Check every input of a scalar-valued tape function against central
/// differences. `f` must rebuild the same graph for any input values.
pub fn grad_check_multi<F>(
    inputs: &[(Vec<f64>, Vec<usize>)],
    f: F,
) -> Result<GradCheckReport, TensorError>
where
    F: Fn(&Tape, &[TensorId]) -> Result<TensorId, TensorError>,
{
    let tape = Tape::new();
    let ids: Vec<TensorId> = inputs
        .iter()
        .map(|(v, s)| tape.param(v.clone(), s.clone()))
        .collect::<Result<_, _>>()?;
    let y = f(&tape, &ids)?;
    if tape.value(y).len() != 1 {
        return Err(TensorError::NotScalar { shape: tape.shape(y) });
    }
    tape.backward(y)?;
    let grads: Vec<Vec<f64>> = ids
        .iter()
        .map(|&id| tape.grad(id).expect("param gradient"))
        .collect();

    let eval = |xs: &[(Vec<f64>, Vec<usize>)]| -> Result<f64, TensorError> {
        let t = Tape::new();
        let ids: Vec<TensorId> = xs
            .iter()
            .map(|(v, s)| t.param(v.clone(), s.clone()))
            .collect::<Result<_, _>>()?;
        let y = f(&t, &ids)?;
        Ok(t.value_scalar(y))
    };

    let mut work: Vec<(Vec<f64>, Vec<usize>)> = inputs.to_vec();
    let mut per_input = Vec::with_capacity(inputs.len());
    let mut max_rel = 0.0f64;
    for i in 0..inputs.len() {
        let mut worst = 0.0f64;
        for j in 0..inputs[i].0.len() {
            let orig = inputs[i].0[j];
            if !orig.is_finite() {
                worst = worst.max(relative_error(grads[i][j], 0.0));
                continue;
            }
            work[i].0[j] = orig + DEFAULT_STEP;
            let fp = eval(&work)?;
            work[i].0[j] = orig - DEFAULT_STEP;
            let fm = eval(&work)?;
            work[i].0[j] = orig;
            let numeric = (fp - fm) / (2.0 * DEFAULT_STEP);
            worst = worst.max(relative_error(grads[i][j], numeric));
        }
        per_input.push(worst);
        max_rel = max_rel.max(worst);
    }
    Ok(GradCheckReport { max_rel_err: max_rel, per_input })
}

/// Single-input convenience wrapper.
pub fn grad_check<F>(values: Vec<f64>, shape: Vec<usize>, f: F) -> Result<GradCheckReport, TensorError>
where
    F: Fn(&Tape, TensorId) -> Result<TensorId, TensorError>,
{
    grad_check_multi(&[(values, shape)], |t, ids| f(t, ids[0]))
}

// ── named per-operator suite ─────────────────────────────────────────────────

pub struct OpCheck {
    pub name: &'static str,
    #[allow(clippy::type_complexity)]
    pub run: Box<dyn Fn(&mut ChaCha20Rng) -> Result<f64, TensorError>>,
}

fn uniform(rng: &mut ChaCha20Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Values bounded away from zero on both sides, for kinked operators.
fn away_from_zero(rng: &mut ChaCha20Rng, n: usize, margin: f64, hi: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let m = rng.gen_range(margin..hi);
            if rng.gen_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect()
}

/// Reduce an operator output to a scalar through a fixed random weighting so
/// index mistakes cannot cancel out.
fn weighted_sum(t: &Tape, x: TensorId, w: &[f64]) -> Result<TensorId, TensorError> {
    let shape = t.shape(x);
    let wt = t.constant(w.to_vec(), shape)?;
    let p = t.mul(x, wt)?;
    t.sum(p)
}

pub fn op_checks() -> Vec<OpCheck> {
    let mut checks: Vec<OpCheck> = Vec::new();
    let mut push = |name: &'static str,
                    run: Box<dyn Fn(&mut ChaCha20Rng) -> Result<f64, TensorError>>| {
        checks.push(OpCheck { name, run });
    };

    push(
        "add",
        Box::new(|rng| {
            let w = uniform(rng, 12, -1.0, 1.0);
            let a = uniform(rng, 12, -2.0, 2.0);
            let b = uniform(rng, 12, -2.0, 2.0);
            let rep = grad_check_multi(&[(a, vec![3, 4]), (b, vec![3, 4])], |t, ids| {
                let y = t.add(ids[0], ids[1])?;
                weighted_sum(t, y, &w)
            })?;
            Ok(rep.max_rel_err)
        }),
    );

    push(
        "sub",
        Box::new(|rng| {
            let w = uniform(rng, 12, -1.0, 1.0);
            let a = uniform(rng, 12, -2.0, 2.0);
            let b = uniform(rng, 12, -2.0, 2.0);
            let rep = grad_check_multi(&[(a, vec![12]), (b, vec![12])], |t, ids| {
                let y = t.sub(ids[0], ids[1])?;
                weighted_sum(t, y, &w)
            })?;
            Ok(rep.max_rel_err)
        }),
    );

    push(
        "mul",
        Box::new(|rng| {
            let w = uniform(rng, 12, -1.0, 1.0);
            let a = uniform(rng, 12, -2.0, 2.0);
            let b = uniform(rng, 12, -2.0, 2.0);
            let rep = grad_check_multi(&[(a, vec![12]), (b, vec![12])], |t, ids| {
                let y = t.mul(ids[0], ids[1])?;
                weighted_sum(t, y, &w)
            })?;
            Ok(rep.max_rel_err)
        }),
    );

    push(
        "scale_add_scalar",
        Box::new(|rng| {
            let w = uniform(rng, 8, -1.0, 1.0);
            let a = uniform(rng, 8, -2.0, 2.0);
            let rep = grad_check(a, vec![8], |t, x| {
                let y = t.scale(x, -1.7)?;
                let y = t.add_scalar(y, 0.3)?;
                weighted_sum(t, y, &w)
            })?;
            Ok(rep.max_rel_err)
        }),
    );

    push(
        "mul_scalar",
        Box::new(|rng| {
            let w = uniform(rng, 6, -1.0, 1.0);
            let a = uniform(rng, 6, -2.0, 2.0);
            let s = uniform(rng, 1, 0.5, 2.0);
            let rep = grad_check_multi(&[(a, vec![6]), (s, vec![1])], |t, ids| {
                let y = t.mul_scalar(ids[0], ids[1])?;
                weighted_sum(t, y, &w)
            })?;
            Ok(rep.max_rel_err)
        }),
    );

    push(
        "tanh",
        Box::new(|rng| {
            let w = uniform(rng, 10, -1.0, 1.0);
            let a = uniform(rng, 10, -2.5, 2.5);
            let rep = grad_check(a, vec![10], |t, x| {
                let y = t.tanh(x)?;
                weighted_sum(t, y, &w)
            })?;
            Ok(rep.max_rel_err)
        }),
    );

    push(
        "relu",
        Box::new(|rng| {
            let w = uniform(rng, 10, -1.0, 1.0);
            let a = away_from_zero(rng, 10, 0.2, 2.0);
            let rep = grad_check(a, vec![10], |t, x| {
                let y = t.relu(x)?;
                weighted_sum(t, y, &w)
            })?;
            Ok(rep.max_rel_err)
        }),
    );

    push(
        "log",
        Box::new(|rng| {
            let w = uniform(rng, 8, -1.0, 1.0);
            let a = uniform(rng, 8, 0.4, 3.0);
            let rep = grad_check(a, vec![8], |t, x| {
                let y = t.log(x)?;
                weighted_sum(t, y, &w)
            })?;
            Ok(rep.max_rel_err)
        }),
    );

    push(
        "recip",
        Box::new(|rng| {
            let w = uniform(rng, 8, -1.0, 1.0);
            let a = away_from_zero(rng, 8, 0.4, 3.0);
            let rep = grad_check(a, vec![8], |t, x| {
                let y = t.recip(x)?;
                weighted_sum(t, y, &w)
            })?;
            Ok(rep.max_rel_err)
        }),
    );

    push(
        "clamp_min",
        Box::new(|rng| {
            // threshold 0.1; samples keep a wide margin on both sides
            let w = uniform(rng, 10, -1.0, 1.0);
            let a = away_from_zero(rng, 10, 0.5, 2.0);
            let rep = grad_check(a, vec![10], |t, x| {
                let y = t.clamp_min(x, 0.1)?;
                weighted_sum(t, y, &w)
            })?;
            Ok(rep.max_rel_err)
        }),
    );

    push(
        "matmul",
        Box::new(|rng| {
            let w = uniform(rng, 3 * 5, -1.0, 1.0);
            let a = uniform(rng, 3 * 4, -1.5, 1.5);
            let b = uniform(rng, 4 * 5, -1.5, 1.5);
            let rep = grad_check_multi(&[(a, vec![3, 4]), (b, vec![4, 5])], |t, ids| {
                let y = t.matmul(ids[0], ids[1])?;
                weighted_sum(t, y, &w)
            })?;
            Ok(rep.max_rel_err)
        }),
    );

    push(
        "transpose",
        Box::new(|rng| {
            let w = uniform(rng, 12, -1.0, 1.0);
            let a = uniform(rng, 12, -2.0, 2.0);
            let rep = grad_check(a, vec![3, 4], |t, x| {
                let y = t.transpose(x)?;
                weighted_sum(t, y, &w)
            })?;
            Ok(rep.max_rel_err)
        }),
    );

    push(
        "outer",
        Box::new(|rng| {
            let w = uniform(rng, 12, -1.0, 1.0);
            let a = uniform(rng, 3, -2.0, 2.0);
            let b = uniform(rng, 4, -2.0, 2.0);
            let rep = grad_check_multi(&[(a, vec![3]), (b, vec![4])], |t, ids| {
                let y = t.outer(ids[0], ids[1])?;
                weighted_sum(t, y, &w)
            })?;
            Ok(rep.max_rel_err)
        }),
    );

    push(
        "add_bias",
        Box::new(|rng| {
            let w = uniform(rng, 12, -1.0, 1.0);
            let x = uniform(rng, 12, -2.0, 2.0);
            let b = uniform(rng, 4, -2.0, 2.0);
            let rep = grad_check_multi(&[(x, vec![3, 4]), (b, vec![4])], |t, ids| {
                let y = t.add_bias(ids[0], ids[1])?;
                weighted_sum(t, y, &w)
            })?;
            Ok(rep.max_rel_err)
        }),
    );

    push(
        "softmax_rows",
        Box::new(|rng| {
            let w = uniform(rng, 12, -1.0, 1.0);
            let a = uniform(rng, 12, -3.0, 3.0);
            let rep = grad_check(a, vec![3, 4], |t, x| {
                let y = t.softmax(x, 1)?;
                weighted_sum(t, y, &w)
            })?;
            Ok(rep.max_rel_err)
        }),
    );

    push(
        "softmax_cols",
        Box::new(|rng| {
            let w = uniform(rng, 12, -1.0, 1.0);
            let a = uniform(rng, 12, -3.0, 3.0);
            let rep = grad_check(a, vec![3, 4], |t, x| {
                let y = t.softmax(x, 0)?;
                weighted_sum(t, y, &w)
            })?;
            Ok(rep.max_rel_err)
        }),
    );

    push(
        "softmax_neg_inf_entries",
        Box::new(|rng| {
            let w = uniform(rng, 8, -1.0, 1.0);
            let mut a = uniform(rng, 8, -3.0, 3.0);
            a[1] = f64::NEG_INFINITY;
            a[6] = f64::NEG_INFINITY;
            let rep = grad_check(a, vec![2, 4], |t, x| {
                let y = t.softmax(x, 1)?;
                weighted_sum(t, y, &w)
            })?;
            Ok(rep.max_rel_err)
        }),
    );

    push(
        "masked_softmax_rows",
        Box::new(|rng| {
            // second row fully masked: output and gradients must stay zero
            let w = uniform(rng, 12, -1.0, 1.0);
            let a = uniform(rng, 12, -3.0, 3.0);
            let mask = vec![
                true, true, false, true, //
                false, false, false, false, //
                true, false, true, true,
            ];
            let rep = grad_check(a, vec![3, 4], move |t, x| {
                let y = t.masked_softmax_rows(x, &mask)?;
                weighted_sum(t, y, &w)
            })?;
            Ok(rep.max_rel_err)
        }),
    );

    push(
        "logsumexp_vec",
        Box::new(|rng| {
            let a = uniform(rng, 9, -3.0, 3.0);
            let rep = grad_check(a, vec![9], |t, x| t.logsumexp(x, 0))?;
            Ok(rep.max_rel_err)
        }),
    );

    push(
        "logsumexp_over_rows",
        Box::new(|rng| {
            let w = uniform(rng, 4, -1.0, 1.0);
            let a = uniform(rng, 12, -3.0, 3.0);
            let rep = grad_check(a, vec![3, 4], |t, x| {
                let y = t.logsumexp(x, 0)?;
                weighted_sum(t, y, &w)
            })?;
            Ok(rep.max_rel_err)
        }),
    );

    push(
        "sum_mean",
        Box::new(|rng| {
            let a = uniform(rng, 10, -2.0, 2.0);
            let rep = grad_check(a, vec![10], |t, x| {
                let s = t.sum(x)?;
                let m = t.mean(x)?;
                let p = t.mul(s, m)?;
                t.sum(p)
            })?;
            Ok(rep.max_rel_err)
        }),
    );

    push(
        "mean_rows",
        Box::new(|rng| {
            let w = uniform(rng, 4, -1.0, 1.0);
            let a = uniform(rng, 12, -2.0, 2.0);
            let rep = grad_check(a, vec![3, 4], |t, x| {
                let y = t.mean_rows(x)?;
                weighted_sum(t, y, &w)
            })?;
            Ok(rep.max_rel_err)
        }),
    );

    push(
        "gather_rows_rank1_repeats",
        Box::new(|rng| {
            let w = uniform(rng, 5, -1.0, 1.0);
            let a = uniform(rng, 6, -2.0, 2.0);
            let rep = grad_check(a, vec![6], |t, x| {
                let y = t.gather_rows(x, &[0, 2, 2, 5, 1])?;
                weighted_sum(t, y, &w)
            })?;
            Ok(rep.max_rel_err)
        }),
    );

    push(
        "gather_rows_rank2",
        Box::new(|rng| {
            let w = uniform(rng, 9, -1.0, 1.0);
            let a = uniform(rng, 12, -2.0, 2.0);
            let rep = grad_check(a, vec![4, 3], |t, x| {
                let y = t.gather_rows(x, &[3, 0, 3])?;
                weighted_sum(t, y, &w)
            })?;
            Ok(rep.max_rel_err)
        }),
    );

    push(
        "concat_last_rank1",
        Box::new(|rng| {
            let w = uniform(rng, 7, -1.0, 1.0);
            let a = uniform(rng, 3, -2.0, 2.0);
            let b = uniform(rng, 4, -2.0, 2.0);
            let rep = grad_check_multi(&[(a, vec![3]), (b, vec![4])], |t, ids| {
                let y = t.concat_last(&[ids[0], ids[1]])?;
                weighted_sum(t, y, &w)
            })?;
            Ok(rep.max_rel_err)
        }),
    );

    push(
        "concat_last_rank2",
        Box::new(|rng| {
            let w = uniform(rng, 10, -1.0, 1.0);
            let a = uniform(rng, 6, -2.0, 2.0);
            let b = uniform(rng, 4, -2.0, 2.0);
            let rep = grad_check_multi(&[(a, vec![2, 3]), (b, vec![2, 2])], |t, ids| {
                let y = t.concat_last(&[ids[0], ids[1]])?;
                weighted_sum(t, y, &w)
            })?;
            Ok(rep.max_rel_err)
        }),
    );

    push(
        "stack_rows",
        Box::new(|rng| {
            let w = uniform(rng, 6, -1.0, 1.0);
            let a = uniform(rng, 3, -2.0, 2.0);
            let b = uniform(rng, 3, -2.0, 2.0);
            let rep = grad_check_multi(&[(a, vec![3]), (b, vec![3])], |t, ids| {
                let y = t.stack_rows(&[ids[0], ids[1]])?;
                weighted_sum(t, y, &w)
            })?;
            Ok(rep.max_rel_err)
        }),
    );

    push(
        "reshape_row",
        Box::new(|rng| {
            let w = uniform(rng, 4, -1.0, 1.0);
            let a = uniform(rng, 12, -2.0, 2.0);
            let rep = grad_check(a, vec![3, 4], |t, x| {
                let r = t.row(x, 1)?;
                weighted_sum(t, r, &w)
            })?;
            Ok(rep.max_rel_err)
        }),
    );

    push(
        "layer_norm",
        Box::new(|rng| {
            let w = uniform(rng, 12, -1.0, 1.0);
            let x = uniform(rng, 12, -2.0, 2.0);
            let g = uniform(rng, 4, 0.5, 1.5);
            let b = uniform(rng, 4, -0.5, 0.5);
            let rep = grad_check_multi(
                &[(x, vec![3, 4]), (g, vec![4]), (b, vec![4])],
                |t, ids| {
                    let y = t.layer_norm(ids[0], ids[1], ids[2], 1e-6)?;
                    weighted_sum(t, y, &w)
                },
            )?;
            Ok(rep.max_rel_err)
        }),
    );

    push(
        "composite_attention_block",
        Box::new(|rng| {
            // one attention head over 4 tokens: softmax(QKᵀ/√d)·V
            let d = 3;
            let x = uniform(rng, 4 * d, -1.0, 1.0);
            let wq = uniform(rng, d * d, -0.7, 0.7);
            let wk = uniform(rng, d * d, -0.7, 0.7);
            let wv = uniform(rng, d * d, -0.7, 0.7);
            let w = uniform(rng, 4 * d, -1.0, 1.0);
            let rep = grad_check_multi(
                &[
                    (x, vec![4, d]),
                    (wq, vec![d, d]),
                    (wk, vec![d, d]),
                    (wv, vec![d, d]),
                ],
                |t, ids| {
                    let q = t.matmul(ids[0], ids[1])?;
                    let k = t.matmul(ids[0], ids[2])?;
                    let v = t.matmul(ids[0], ids[3])?;
                    let kt = t.transpose(k)?;
                    let s = t.matmul(q, kt)?;
                    let s = t.scale(s, 1.0 / (d as f64).sqrt())?;
                    let a = t.softmax(s, 1)?;
                    let y = t.matmul(a, v)?;
                    weighted_sum(t, y, &w)
                },
            )?;
            Ok(rep.max_rel_err)
        }),
    );

    push(
        "composite_pair_score",
        Box::new(|rng| {
            // logsumexp pooling + tanh projection + grouped outer-product score
            let d = 4;
            let m = uniform(rng, 3 * d, -1.0, 1.0);
            let proj = uniform(rng, 2 * d * d, -0.5, 0.5);
            // two groups of 2x2 outer products flatten to 8 features
            let wb = uniform(rng, 2 * 8, -0.5, 0.5);
            let rep = grad_check_multi(
                &[(m, vec![3, d]), (proj, vec![2 * d, d]), (wb, vec![2, 8])],
                |t, ids| {
                    let pooled = t.logsumexp(ids[0], 0)?;
                    let two = t.concat_last(&[pooled, pooled])?;
                    let two = t.reshape(two, vec![1, 2 * d])?;
                    let z = t.matmul(two, ids[1])?;
                    let z = t.tanh(z)?;
                    let z = t.reshape(z, vec![d])?;
                    let g1 = t.gather_rows(z, &[0, 1])?;
                    let g2 = t.gather_rows(z, &[2, 3])?;
                    let o1 = t.outer(g1, g1)?;
                    let o2 = t.outer(g2, g2)?;
                    let f1 = t.reshape(o1, vec![4])?;
                    let f2 = t.reshape(o2, vec![4])?;
                    let f = t.concat_last(&[f1, f2])?;
                    let f = t.reshape(f, vec![8, 1])?;
                    let o = t.matmul(ids[2], f)?;
                    t.sum(o)
                },
            )?;
            Ok(rep.max_rel_err)
        }),
    );

    checks
}

/// Run every operator check once per seed; returns `(name, worst error)`
/// pairs in suite order.
pub fn run_op_checks(seeds: &[u64]) -> Result<Vec<(String, f64)>, TensorError> {
    use rand::SeedableRng;
    let checks = op_checks();
    let mut out = Vec::with_capacity(checks.len());
    for check in &checks {
        let mut worst = 0.0f64;
        for &seed in seeds {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            worst = worst.max((check.run)(&mut rng)?);
        }
        out.push((check.name.to_string(), worst));
    }
    Ok(out)
}
