//! Tape operators: forward evaluation plus recorded backward steps.
//!
//! Conventions: rank-2 tensors are row-major `[rows, cols]`; `-inf` is the
//! canonical mask value for softmax-family inputs and maps to exactly zero
//! probability; reductions over zero elements and all-`-inf` slices are
//! errors, never silent zeros.

use super::{Inner, Tape, TensorError, TensorId};

// ── dense helpers ────────────────────────────────────────────────────────────

/// `[m,k] · [k,n] -> [m,n]`
fn mm(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            let crow = &mut c[i * n..(i + 1) * n];
            for j in 0..n {
                crow[j] += av * brow[j];
            }
        }
    }
    c
}

/// `g[m,n] · b[k,n]ᵀ -> [m,k]`
fn mm_nt(g: &[f64], b: &[f64], m: usize, n: usize, k: usize) -> Vec<f64> {
    let mut d = vec![0.0; m * k];
    for i in 0..m {
        for p in 0..k {
            let mut s = 0.0;
            for j in 0..n {
                s += g[i * n + j] * b[p * n + j];
            }
            d[i * k + p] = s;
        }
    }
    d
}

/// `a[m,k]ᵀ · g[m,n] -> [k,n]`
fn mm_tn(a: &[f64], g: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut d = vec![0.0; k * n];
    for i in 0..m {
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let grow = &g[i * n..(i + 1) * n];
            let drow = &mut d[p * n..(p + 1) * n];
            for j in 0..n {
                drow[j] += av * grow[j];
            }
        }
    }
    d
}

/// Flat index lists for the slices along `axis`: rows for axis 1, columns
/// for axis 0 on rank 2, the whole buffer on rank 1.
fn axis_slices(shape: &[usize], axis: usize, op: &'static str) -> Result<Vec<Vec<usize>>, TensorError> {
    match (shape.len(), axis) {
        (1, 0) => Ok(vec![(0..shape[0]).collect()]),
        (2, 1) => {
            let (r, c) = (shape[0], shape[1]);
            Ok((0..r).map(|i| (i * c..(i + 1) * c).collect()).collect())
        }
        (2, 0) => {
            let (r, c) = (shape[0], shape[1]);
            Ok((0..c)
                .map(|j| (0..r).map(|i| i * c + j).collect())
                .collect())
        }
        (rank, _) => Err(TensorError::AxisOutOfRange { op, axis, rank }),
    }
}

fn rank2(t: &Inner, id: TensorId, op: &'static str) -> Result<(usize, usize), TensorError> {
    let s = t.shape_of(id)?;
    if s.len() != 2 {
        return Err(TensorError::UnsupportedShape { op, shape: s });
    }
    Ok((s[0], s[1]))
}

fn rank1(t: &Inner, id: TensorId, op: &'static str) -> Result<usize, TensorError> {
    let s = t.shape_of(id)?;
    if s.len() != 1 {
        return Err(TensorError::UnsupportedShape { op, shape: s });
    }
    Ok(s[0])
}

// ── elementwise ──────────────────────────────────────────────────────────────

impl Tape {
    pub fn add(&self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        self.with_inner(|t| {
            let (sa, sb) = (t.shape_of(a)?, t.shape_of(b)?);
            if sa != sb {
                return Err(TensorError::ShapeMismatch { op: "add", lhs: sa, rhs: sb });
            }
            let va = t.values_of(a)?;
            let vb = t.values_of(b)?;
            let out_v: Vec<f64> = va.iter().zip(&vb).map(|(x, y)| x + y).collect();
            let req = t.requires(a) || t.requires(b);
            let out = t.push_result(out_v, sa, req);
            if req {
                t.record(Box::new(move |inn| {
                    let g = inn.grad_vec(out);
                    inn.acc(a, &g);
                    inn.acc(b, &g);
                }));
            }
            Ok(out)
        })
    }

    pub fn sub(&self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        self.with_inner(|t| {
            let (sa, sb) = (t.shape_of(a)?, t.shape_of(b)?);
            if sa != sb {
                return Err(TensorError::ShapeMismatch { op: "sub", lhs: sa, rhs: sb });
            }
            let va = t.values_of(a)?;
            let vb = t.values_of(b)?;
            let out_v: Vec<f64> = va.iter().zip(&vb).map(|(x, y)| x - y).collect();
            let req = t.requires(a) || t.requires(b);
            let out = t.push_result(out_v, sa, req);
            if req {
                t.record(Box::new(move |inn| {
                    let g = inn.grad_vec(out);
                    inn.acc(a, &g);
                    let neg: Vec<f64> = g.iter().map(|x| -x).collect();
                    inn.acc(b, &neg);
                }));
            }
            Ok(out)
        })
    }

    pub fn mul(&self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        self.with_inner(|t| {
            let (sa, sb) = (t.shape_of(a)?, t.shape_of(b)?);
            if sa != sb {
                return Err(TensorError::ShapeMismatch { op: "mul", lhs: sa, rhs: sb });
            }
            let va = t.values_of(a)?;
            let vb = t.values_of(b)?;
            let out_v: Vec<f64> = va.iter().zip(&vb).map(|(x, y)| x * y).collect();
            let req = t.requires(a) || t.requires(b);
            let out = t.push_result(out_v, sa, req);
            if req {
                t.record(Box::new(move |inn| {
                    let g = inn.grad_vec(out);
                    let va = inn.values_of(a).expect("mul input");
                    let vb = inn.values_of(b).expect("mul input");
                    let da: Vec<f64> = g.iter().zip(&vb).map(|(gi, y)| gi * y).collect();
                    let db: Vec<f64> = g.iter().zip(&va).map(|(gi, x)| gi * x).collect();
                    inn.acc(a, &da);
                    inn.acc(b, &db);
                }));
            }
            Ok(out)
        })
    }

    pub fn scale(&self, a: TensorId, c: f64) -> Result<TensorId, TensorError> {
        self.with_inner(|t| {
            let sa = t.shape_of(a)?;
            let out_v: Vec<f64> = t.values_of(a)?.iter().map(|x| x * c).collect();
            let req = t.requires(a);
            let out = t.push_result(out_v, sa, req);
            if req {
                t.record(Box::new(move |inn| {
                    let g: Vec<f64> = inn.grad_vec(out).iter().map(|x| x * c).collect();
                    inn.acc(a, &g);
                }));
            }
            Ok(out)
        })
    }

    pub fn add_scalar(&self, a: TensorId, c: f64) -> Result<TensorId, TensorError> {
        self.with_inner(|t| {
            let sa = t.shape_of(a)?;
            let out_v: Vec<f64> = t.values_of(a)?.iter().map(|x| x + c).collect();
            let req = t.requires(a);
            let out = t.push_result(out_v, sa, req);
            if req {
                t.record(Box::new(move |inn| {
                    let g = inn.grad_vec(out);
                    inn.acc(a, &g);
                }));
            }
            Ok(out)
        })
    }

    pub fn neg(&self, a: TensorId) -> Result<TensorId, TensorError> {
        self.scale(a, -1.0)
    }

    /// Elementwise product with a single-element tensor.
    pub fn mul_scalar(&self, a: TensorId, s: TensorId) -> Result<TensorId, TensorError> {
        self.with_inner(|t| {
            let sa = t.shape_of(a)?;
            let ss = t.shape_of(s)?;
            if ss.iter().product::<usize>() != 1 {
                return Err(TensorError::ShapeMismatch { op: "mul_scalar", lhs: sa, rhs: ss });
            }
            let sv = t.values_of(s)?[0];
            let va = t.values_of(a)?;
            let out_v: Vec<f64> = va.iter().map(|x| x * sv).collect();
            let req = t.requires(a) || t.requires(s);
            let out = t.push_result(out_v, sa, req);
            if req {
                t.record(Box::new(move |inn| {
                    let g = inn.grad_vec(out);
                    let sv = inn.values_of(s).expect("mul_scalar input")[0];
                    let va = inn.values_of(a).expect("mul_scalar input");
                    let da: Vec<f64> = g.iter().map(|gi| gi * sv).collect();
                    let ds: f64 = g.iter().zip(&va).map(|(gi, x)| gi * x).sum();
                    inn.acc(a, &da);
                    inn.acc(s, &[ds]);
                }));
            }
            Ok(out)
        })
    }

    pub fn tanh(&self, a: TensorId) -> Result<TensorId, TensorError> {
        self.with_inner(|t| {
            let sa = t.shape_of(a)?;
            let out_v: Vec<f64> = t.values_of(a)?.iter().map(|x| x.tanh()).collect();
            let req = t.requires(a);
            let out = t.push_result(out_v, sa, req);
            if req {
                t.record(Box::new(move |inn| {
                    let g = inn.grad_vec(out);
                    let y = inn.values_of(out).expect("tanh output");
                    let da: Vec<f64> = g.iter().zip(&y).map(|(gi, yi)| gi * (1.0 - yi * yi)).collect();
                    inn.acc(a, &da);
                }));
            }
            Ok(out)
        })
    }

    pub fn relu(&self, a: TensorId) -> Result<TensorId, TensorError> {
        self.with_inner(|t| {
            let sa = t.shape_of(a)?;
            let va = t.values_of(a)?;
            let out_v: Vec<f64> = va.iter().map(|x| x.max(0.0)).collect();
            let req = t.requires(a);
            let out = t.push_result(out_v, sa, req);
            if req {
                t.record(Box::new(move |inn| {
                    let g = inn.grad_vec(out);
                    let x = inn.values_of(a).expect("relu input");
                    let da: Vec<f64> = g
                        .iter()
                        .zip(&x)
                        .map(|(gi, xi)| if *xi > 0.0 { *gi } else { 0.0 })
                        .collect();
                    inn.acc(a, &da);
                }));
            }
            Ok(out)
        })
    }

    /// Natural logarithm; caller guarantees positive inputs (guards live upstream).
    pub fn log(&self, a: TensorId) -> Result<TensorId, TensorError> {
        self.with_inner(|t| {
            let sa = t.shape_of(a)?;
            let out_v: Vec<f64> = t.values_of(a)?.iter().map(|x| x.ln()).collect();
            let req = t.requires(a);
            let out = t.push_result(out_v, sa, req);
            if req {
                t.record(Box::new(move |inn| {
                    let g = inn.grad_vec(out);
                    let x = inn.values_of(a).expect("log input");
                    let da: Vec<f64> = g.iter().zip(&x).map(|(gi, xi)| gi / xi).collect();
                    inn.acc(a, &da);
                }));
            }
            Ok(out)
        })
    }

    pub fn recip(&self, a: TensorId) -> Result<TensorId, TensorError> {
        self.with_inner(|t| {
            let sa = t.shape_of(a)?;
            let out_v: Vec<f64> = t.values_of(a)?.iter().map(|x| 1.0 / x).collect();
            let req = t.requires(a);
            let out = t.push_result(out_v, sa, req);
            if req {
                t.record(Box::new(move |inn| {
                    let g = inn.grad_vec(out);
                    let y = inn.values_of(out).expect("recip output");
                    let da: Vec<f64> = g.iter().zip(&y).map(|(gi, yi)| -gi * yi * yi).collect();
                    inn.acc(a, &da);
                }));
            }
            Ok(out)
        })
    }

    /// `max(x, c)`; gradient passes only where `x > c`.
    pub fn clamp_min(&self, a: TensorId, c: f64) -> Result<TensorId, TensorError> {
        self.with_inner(|t| {
            let sa = t.shape_of(a)?;
            let out_v: Vec<f64> = t.values_of(a)?.iter().map(|x| x.max(c)).collect();
            let req = t.requires(a);
            let out = t.push_result(out_v, sa, req);
            if req {
                t.record(Box::new(move |inn| {
                    let g = inn.grad_vec(out);
                    let x = inn.values_of(a).expect("clamp_min input");
                    let da: Vec<f64> = g
                        .iter()
                        .zip(&x)
                        .map(|(gi, xi)| if *xi > c { *gi } else { 0.0 })
                        .collect();
                    inn.acc(a, &da);
                }));
            }
            Ok(out)
        })
    }
}

// ── linear algebra ───────────────────────────────────────────────────────────

impl Tape {
    pub fn matmul(&self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        self.with_inner(|t| {
            let (m, k) = rank2(t, a, "matmul")?;
            let (k2, n) = rank2(t, b, "matmul")?;
            if k != k2 {
                return Err(TensorError::ShapeMismatch {
                    op: "matmul",
                    lhs: vec![m, k],
                    rhs: vec![k2, n],
                });
            }
            let va = t.values_of(a)?;
            let vb = t.values_of(b)?;
            let out_v = mm(&va, &vb, m, k, n);
            let req = t.requires(a) || t.requires(b);
            let out = t.push_result(out_v, vec![m, n], req);
            if req {
                t.record(Box::new(move |inn| {
                    let g = inn.grad_vec(out);
                    let va = inn.values_of(a).expect("matmul input");
                    let vb = inn.values_of(b).expect("matmul input");
                    let da = mm_nt(&g, &vb, m, n, k);
                    let db = mm_tn(&va, &g, m, k, n);
                    inn.acc(a, &da);
                    inn.acc(b, &db);
                }));
            }
            Ok(out)
        })
    }

    pub fn transpose(&self, a: TensorId) -> Result<TensorId, TensorError> {
        self.with_inner(|t| {
            let (r, c) = rank2(t, a, "transpose")?;
            let va = t.values_of(a)?;
            let mut out_v = vec![0.0; r * c];
            for i in 0..r {
                for j in 0..c {
                    out_v[j * r + i] = va[i * c + j];
                }
            }
            let req = t.requires(a);
            let out = t.push_result(out_v, vec![c, r], req);
            if req {
                t.record(Box::new(move |inn| {
                    let g = inn.grad_vec(out);
                    let mut da = vec![0.0; r * c];
                    for j in 0..c {
                        for i in 0..r {
                            da[i * c + j] = g[j * r + i];
                        }
                    }
                    inn.acc(a, &da);
                }));
            }
            Ok(out)
        })
    }

    /// Outer product of two rank-1 tensors: `[m] ⊗ [n] -> [m,n]`.
    pub fn outer(&self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        self.with_inner(|t| {
            let m = rank1(t, a, "outer")?;
            let n = rank1(t, b, "outer")?;
            let va = t.values_of(a)?;
            let vb = t.values_of(b)?;
            let mut out_v = vec![0.0; m * n];
            for i in 0..m {
                for j in 0..n {
                    out_v[i * n + j] = va[i] * vb[j];
                }
            }
            let req = t.requires(a) || t.requires(b);
            let out = t.push_result(out_v, vec![m, n], req);
            if req {
                t.record(Box::new(move |inn| {
                    let g = inn.grad_vec(out);
                    let va = inn.values_of(a).expect("outer input");
                    let vb = inn.values_of(b).expect("outer input");
                    let mut da = vec![0.0; m];
                    let mut db = vec![0.0; n];
                    for i in 0..m {
                        for j in 0..n {
                            da[i] += g[i * n + j] * vb[j];
                            db[j] += g[i * n + j] * va[i];
                        }
                    }
                    inn.acc(a, &da);
                    inn.acc(b, &db);
                }));
            }
            Ok(out)
        })
    }

    /// Add a rank-1 bias to every row of a rank-2 tensor.
    pub fn add_bias(&self, x: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        self.with_inner(|t| {
            let (r, c) = rank2(t, x, "add_bias")?;
            let n = rank1(t, b, "add_bias")?;
            if n != c {
                return Err(TensorError::ShapeMismatch {
                    op: "add_bias",
                    lhs: vec![r, c],
                    rhs: vec![n],
                });
            }
            let vx = t.values_of(x)?;
            let vb = t.values_of(b)?;
            let mut out_v = vx.clone();
            for i in 0..r {
                for j in 0..c {
                    out_v[i * c + j] += vb[j];
                }
            }
            let req = t.requires(x) || t.requires(b);
            let out = t.push_result(out_v, vec![r, c], req);
            if req {
                t.record(Box::new(move |inn| {
                    let g = inn.grad_vec(out);
                    let mut db = vec![0.0; c];
                    for i in 0..r {
                        for j in 0..c {
                            db[j] += g[i * c + j];
                        }
                    }
                    inn.acc(x, &g);
                    inn.acc(b, &db);
                }));
            }
            Ok(out)
        })
    }
}

// ── softmax family ───────────────────────────────────────────────────────────

impl Tape {
    /// Softmax along `axis`. `-inf` entries map to exactly zero; a slice that
    /// is entirely `-inf` is an error.
    pub fn softmax(&self, a: TensorId, axis: usize) -> Result<TensorId, TensorError> {
        self.with_inner(|t| {
            let sa = t.shape_of(a)?;
            let slices = axis_slices(&sa, axis, "softmax")?;
            let va = t.values_of(a)?;
            let mut out_v = vec![0.0; va.len()];
            for (si, idxs) in slices.iter().enumerate() {
                let max = idxs.iter().map(|&i| va[i]).fold(f64::NEG_INFINITY, f64::max);
                if max == f64::NEG_INFINITY {
                    return Err(TensorError::DegenerateSlice { op: "softmax", index: si });
                }
                let mut sum = 0.0;
                for &i in idxs {
                    let e = (va[i] - max).exp();
                    out_v[i] = e;
                    sum += e;
                }
                for &i in idxs {
                    out_v[i] /= sum;
                }
            }
            let req = t.requires(a);
            let out = t.push_result(out_v, sa, req);
            if req {
                t.record(Box::new(move |inn| {
                    let g = inn.grad_vec(out);
                    let y = inn.values_of(out).expect("softmax output");
                    let mut da = vec![0.0; g.len()];
                    for idxs in &slices {
                        let s: f64 = idxs.iter().map(|&i| g[i] * y[i]).sum();
                        for &i in idxs {
                            da[i] = y[i] * (g[i] - s);
                        }
                    }
                    inn.acc(a, &da);
                }));
            }
            Ok(out)
        })
    }

    /// Row softmax restricted to `mask`-true entries. Masked entries are
    /// exactly zero; a row with no unmasked entry becomes all-zero (used for
    /// isolated graph nodes) rather than erroring.
    pub fn masked_softmax_rows(&self, a: TensorId, mask: &[bool]) -> Result<TensorId, TensorError> {
        self.with_inner(|t| {
            let (r, c) = rank2(t, a, "masked_softmax_rows")?;
            if mask.len() != r * c {
                return Err(TensorError::LengthMismatch {
                    expected: r * c,
                    got: mask.len(),
                    shape: vec![r, c],
                });
            }
            let va = t.values_of(a)?;
            let mut out_v = vec![0.0; r * c];
            for i in 0..r {
                let row = i * c;
                let mut max = f64::NEG_INFINITY;
                for j in 0..c {
                    if mask[row + j] {
                        max = max.max(va[row + j]);
                    }
                }
                if max == f64::NEG_INFINITY {
                    // fully masked row: all-zero output by contract
                    continue;
                }
                let mut sum = 0.0;
                for j in 0..c {
                    if mask[row + j] {
                        let e = (va[row + j] - max).exp();
                        out_v[row + j] = e;
                        sum += e;
                    }
                }
                for j in 0..c {
                    out_v[row + j] /= sum;
                }
            }
            let req = t.requires(a);
            let out = t.push_result(out_v, vec![r, c], req);
            if req {
                t.record(Box::new(move |inn| {
                    let g = inn.grad_vec(out);
                    let y = inn.values_of(out).expect("masked softmax output");
                    let mut da = vec![0.0; g.len()];
                    for i in 0..r {
                        let row = i * c;
                        let s: f64 = (0..c).map(|j| g[row + j] * y[row + j]).sum();
                        for j in 0..c {
                            da[row + j] = y[row + j] * (g[row + j] - s);
                        }
                    }
                    inn.acc(a, &da);
                }));
            }
            Ok(out)
        })
    }

    /// `log Σ exp` along `axis` with max-subtraction; an all-`-inf` slice is
    /// an error.
    pub fn logsumexp(&self, a: TensorId, axis: usize) -> Result<TensorId, TensorError> {
        self.with_inner(|t| {
            let sa = t.shape_of(a)?;
            let slices = axis_slices(&sa, axis, "logsumexp")?;
            let va = t.values_of(a)?;
            let mut out_v = Vec::with_capacity(slices.len());
            for (si, idxs) in slices.iter().enumerate() {
                if idxs.is_empty() {
                    return Err(TensorError::EmptyReduction { op: "logsumexp" });
                }
                let max = idxs.iter().map(|&i| va[i]).fold(f64::NEG_INFINITY, f64::max);
                if max == f64::NEG_INFINITY {
                    return Err(TensorError::DegenerateSlice { op: "logsumexp", index: si });
                }
                let sum: f64 = idxs.iter().map(|&i| (va[i] - max).exp()).sum();
                out_v.push(max + sum.ln());
            }
            let out_shape = vec![out_v.len()];
            let req = t.requires(a);
            let out = t.push_result(out_v, out_shape, req);
            if req {
                t.record(Box::new(move |inn| {
                    let g = inn.grad_vec(out);
                    let x = inn.values_of(a).expect("logsumexp input");
                    let y = inn.values_of(out).expect("logsumexp output");
                    let mut da = vec![0.0; x.len()];
                    for (si, idxs) in slices.iter().enumerate() {
                        for &i in idxs {
                            da[i] = g[si] * (x[i] - y[si]).exp();
                        }
                    }
                    inn.acc(a, &da);
                }));
            }
            Ok(out)
        })
    }
}

// ── reductions ───────────────────────────────────────────────────────────────

impl Tape {
    pub fn sum(&self, a: TensorId) -> Result<TensorId, TensorError> {
        self.with_inner(|t| {
            let va = t.values_of(a)?;
            if va.is_empty() {
                return Err(TensorError::EmptyReduction { op: "sum" });
            }
            let s: f64 = va.iter().sum();
            let n = va.len();
            let req = t.requires(a);
            let out = t.push_result(vec![s], vec![1], req);
            if req {
                t.record(Box::new(move |inn| {
                    let g = inn.grad_vec(out)[0];
                    inn.acc(a, &vec![g; n]);
                }));
            }
            Ok(out)
        })
    }

    pub fn mean(&self, a: TensorId) -> Result<TensorId, TensorError> {
        self.with_inner(|t| {
            let va = t.values_of(a)?;
            if va.is_empty() {
                return Err(TensorError::EmptyReduction { op: "mean" });
            }
            let n = va.len();
            let s: f64 = va.iter().sum::<f64>() / n as f64;
            let req = t.requires(a);
            let out = t.push_result(vec![s], vec![1], req);
            if req {
                t.record(Box::new(move |inn| {
                    let g = inn.grad_vec(out)[0] / n as f64;
                    inn.acc(a, &vec![g; n]);
                }));
            }
            Ok(out)
        })
    }

    /// Mean over the rows of a rank-2 tensor: `[k,d] -> [d]`.
    pub fn mean_rows(&self, a: TensorId) -> Result<TensorId, TensorError> {
        self.with_inner(|t| {
            let (k, d) = rank2(t, a, "mean_rows")?;
            if k == 0 {
                return Err(TensorError::EmptyReduction { op: "mean_rows" });
            }
            let va = t.values_of(a)?;
            let mut out_v = vec![0.0; d];
            for i in 0..k {
                for j in 0..d {
                    out_v[j] += va[i * d + j];
                }
            }
            for v in out_v.iter_mut() {
                *v /= k as f64;
            }
            let req = t.requires(a);
            let out = t.push_result(out_v, vec![d], req);
            if req {
                t.record(Box::new(move |inn| {
                    let g = inn.grad_vec(out);
                    let mut da = vec![0.0; k * d];
                    for i in 0..k {
                        for j in 0..d {
                            da[i * d + j] = g[j] / k as f64;
                        }
                    }
                    inn.acc(a, &da);
                }));
            }
            Ok(out)
        })
    }
}

// ── structural ───────────────────────────────────────────────────────────────

impl Tape {
    /// Select rows (rank 2) or elements (rank 1) by index, with repetition
    /// allowed. Backward scatter-adds.
    pub fn gather_rows(&self, a: TensorId, idx: &[usize]) -> Result<TensorId, TensorError> {
        self.with_inner(|t| {
            let sa = t.shape_of(a)?;
            let va = t.values_of(a)?;
            let idx: Vec<usize> = idx.to_vec();
            match sa.len() {
                1 => {
                    let n = sa[0];
                    for &i in &idx {
                        if i >= n {
                            return Err(TensorError::IndexOutOfRange { op: "gather_rows", index: i, bound: n });
                        }
                    }
                    let out_v: Vec<f64> = idx.iter().map(|&i| va[i]).collect();
                    let req = t.requires(a);
                    let out = t.push_result(out_v, vec![idx.len()], req);
                    if req {
                        t.record(Box::new(move |inn| {
                            let g = inn.grad_vec(out);
                            let mut da = vec![0.0; n];
                            for (k, &i) in idx.iter().enumerate() {
                                da[i] += g[k];
                            }
                            inn.acc(a, &da);
                        }));
                    }
                    Ok(out)
                }
                2 => {
                    let (n, d) = (sa[0], sa[1]);
                    for &i in &idx {
                        if i >= n {
                            return Err(TensorError::IndexOutOfRange { op: "gather_rows", index: i, bound: n });
                        }
                    }
                    let mut out_v = Vec::with_capacity(idx.len() * d);
                    for &i in &idx {
                        out_v.extend_from_slice(&va[i * d..(i + 1) * d]);
                    }
                    let k = idx.len();
                    let req = t.requires(a);
                    let out = t.push_result(out_v, vec![k, d], req);
                    if req {
                        t.record(Box::new(move |inn| {
                            let g = inn.grad_vec(out);
                            let mut da = vec![0.0; n * d];
                            for (r, &i) in idx.iter().enumerate() {
                                for j in 0..d {
                                    da[i * d + j] += g[r * d + j];
                                }
                            }
                            inn.acc(a, &da);
                        }));
                    }
                    Ok(out)
                }
                _ => Err(TensorError::UnsupportedShape { op: "gather_rows", shape: sa }),
            }
        })
    }

    /// Concatenate along the last axis: rank-1 parts chain into one vector;
    /// rank-2 parts with equal row counts concatenate their columns.
    pub fn concat_last(&self, parts: &[TensorId]) -> Result<TensorId, TensorError> {
        self.with_inner(|t| {
            if parts.is_empty() {
                return Err(TensorError::EmptyReduction { op: "concat_last" });
            }
            let shapes: Vec<Vec<usize>> = parts
                .iter()
                .map(|&p| t.shape_of(p))
                .collect::<Result<_, _>>()?;
            let rank = shapes[0].len();
            if shapes.iter().any(|s| s.len() != rank) {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_last",
                    lhs: shapes[0].clone(),
                    rhs: shapes.iter().find(|s| s.len() != rank).unwrap().clone(),
                });
            }
            let parts: Vec<TensorId> = parts.to_vec();
            let req = parts.iter().any(|&p| t.requires(p));
            match rank {
                1 => {
                    let widths: Vec<usize> = shapes.iter().map(|s| s[0]).collect();
                    let mut out_v = Vec::with_capacity(widths.iter().sum());
                    for &p in &parts {
                        out_v.extend_from_slice(&t.values_of(p)?);
                    }
                    let total = out_v.len();
                    let out = t.push_result(out_v, vec![total], req);
                    if req {
                        t.record(Box::new(move |inn| {
                            let g = inn.grad_vec(out);
                            let mut off = 0;
                            for (&p, &w) in parts.iter().zip(&widths) {
                                inn.acc(p, &g[off..off + w]);
                                off += w;
                            }
                        }));
                    }
                    Ok(out)
                }
                2 => {
                    let rows = shapes[0][0];
                    if shapes.iter().any(|s| s[0] != rows) {
                        return Err(TensorError::ShapeMismatch {
                            op: "concat_last",
                            lhs: shapes[0].clone(),
                            rhs: shapes.iter().find(|s| s[0] != rows).unwrap().clone(),
                        });
                    }
                    let widths: Vec<usize> = shapes.iter().map(|s| s[1]).collect();
                    let total: usize = widths.iter().sum();
                    let mut out_v = vec![0.0; rows * total];
                    let mut off = 0;
                    for (&p, &w) in parts.iter().zip(&widths) {
                        let v = t.values_of(p)?;
                        for i in 0..rows {
                            out_v[i * total + off..i * total + off + w]
                                .copy_from_slice(&v[i * w..(i + 1) * w]);
                        }
                        off += w;
                    }
                    let out = t.push_result(out_v, vec![rows, total], req);
                    if req {
                        t.record(Box::new(move |inn| {
                            let g = inn.grad_vec(out);
                            let mut off = 0;
                            for (&p, &w) in parts.iter().zip(&widths) {
                                let mut dp = vec![0.0; rows * w];
                                for i in 0..rows {
                                    dp[i * w..(i + 1) * w]
                                        .copy_from_slice(&g[i * total + off..i * total + off + w]);
                                }
                                inn.acc(p, &dp);
                                off += w;
                            }
                        }));
                    }
                    Ok(out)
                }
                _ => Err(TensorError::UnsupportedShape { op: "concat_last", shape: shapes[0].clone() }),
            }
        })
    }

    /// Stack rank-1 tensors of equal length into a rank-2 tensor, one row each.
    pub fn stack_rows(&self, parts: &[TensorId]) -> Result<TensorId, TensorError> {
        self.with_inner(|t| {
            if parts.is_empty() {
                return Err(TensorError::EmptyReduction { op: "stack_rows" });
            }
            let d = rank1(t, parts[0], "stack_rows")?;
            let parts: Vec<TensorId> = parts.to_vec();
            let mut out_v = Vec::with_capacity(parts.len() * d);
            for &p in &parts {
                let w = rank1(t, p, "stack_rows")?;
                if w != d {
                    return Err(TensorError::ShapeMismatch {
                        op: "stack_rows",
                        lhs: vec![d],
                        rhs: vec![w],
                    });
                }
                out_v.extend_from_slice(&t.values_of(p)?);
            }
            let k = parts.len();
            let req = parts.iter().any(|&p| t.requires(p));
            let out = t.push_result(out_v, vec![k, d], req);
            if req {
                t.record(Box::new(move |inn| {
                    let g = inn.grad_vec(out);
                    for (i, &p) in parts.iter().enumerate() {
                        inn.acc(p, &g[i * d..(i + 1) * d]);
                    }
                }));
            }
            Ok(out)
        })
    }

    pub fn reshape(&self, a: TensorId, shape: Vec<usize>) -> Result<TensorId, TensorError> {
        self.with_inner(|t| {
            let va = t.values_of(a)?;
            let expected: usize = shape.iter().product();
            if expected != va.len() || shape.is_empty() || shape.len() > 2 {
                return Err(TensorError::LengthMismatch {
                    expected,
                    got: va.len(),
                    shape,
                });
            }
            let req = t.requires(a);
            let out = t.push_result(va, shape, req);
            if req {
                t.record(Box::new(move |inn| {
                    let g = inn.grad_vec(out);
                    inn.acc(a, &g);
                }));
            }
            Ok(out)
        })
    }

    /// Row `i` of a rank-2 tensor as a rank-1 tensor.
    pub fn row(&self, a: TensorId, i: usize) -> Result<TensorId, TensorError> {
        let sa = self.shape(a);
        if sa.len() != 2 {
            return Err(TensorError::UnsupportedShape { op: "row", shape: sa });
        }
        let picked = self.gather_rows(a, &[i])?;
        self.reshape(picked, vec![sa[1]])
    }

    /// Dot product of two rank-1 tensors, as a single-element tensor.
    pub fn dot(&self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        let p = self.mul(a, b)?;
        self.sum(p)
    }
}

// ── layer norm ───────────────────────────────────────────────────────────────

impl Tape {
    /// Per-row layer normalization with learned gain and bias.
    pub fn layer_norm(
        &self,
        x: TensorId,
        gain: TensorId,
        bias: TensorId,
        eps: f64,
    ) -> Result<TensorId, TensorError> {
        self.with_inner(|t| {
            let (r, c) = rank2(t, x, "layer_norm")?;
            if c == 0 {
                return Err(TensorError::EmptyReduction { op: "layer_norm" });
            }
            let gc = rank1(t, gain, "layer_norm")?;
            let bc = rank1(t, bias, "layer_norm")?;
            if gc != c || bc != c {
                return Err(TensorError::ShapeMismatch {
                    op: "layer_norm",
                    lhs: vec![r, c],
                    rhs: vec![gc.max(bc)],
                });
            }
            let vx = t.values_of(x)?;
            let vg = t.values_of(gain)?;
            let vb = t.values_of(bias)?;
            let mut out_v = vec![0.0; r * c];
            let mut xhat = vec![0.0; r * c];
            let mut inv_sigma = vec![0.0; r];
            for i in 0..r {
                let row = &vx[i * c..(i + 1) * c];
                let mu: f64 = row.iter().sum::<f64>() / c as f64;
                let var: f64 = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / c as f64;
                let inv = 1.0 / (var + eps).sqrt();
                inv_sigma[i] = inv;
                for j in 0..c {
                    let h = (row[j] - mu) * inv;
                    xhat[i * c + j] = h;
                    out_v[i * c + j] = vg[j] * h + vb[j];
                }
            }
            let req = t.requires(x) || t.requires(gain) || t.requires(bias);
            let out = t.push_result(out_v, vec![r, c], req);
            if req {
                t.record(Box::new(move |inn| {
                    let g = inn.grad_vec(out);
                    let vg = inn.values_of(gain).expect("layer_norm gain");
                    let mut dx = vec![0.0; r * c];
                    let mut dgain = vec![0.0; c];
                    let mut dbias = vec![0.0; c];
                    for i in 0..r {
                        let base = i * c;
                        let mut mean_dh = 0.0;
                        let mut mean_dh_h = 0.0;
                        for j in 0..c {
                            let dh = g[base + j] * vg[j];
                            mean_dh += dh;
                            mean_dh_h += dh * xhat[base + j];
                        }
                        mean_dh /= c as f64;
                        mean_dh_h /= c as f64;
                        for j in 0..c {
                            let dh = g[base + j] * vg[j];
                            dx[base + j] =
                                inv_sigma[i] * (dh - mean_dh - xhat[base + j] * mean_dh_h);
                            dgain[j] += g[base + j] * xhat[base + j];
                            dbias[j] += g[base + j];
                        }
                    }
                    inn.acc(x, &dx);
                    inn.acc(gain, &dgain);
                    inn.acc(bias, &dbias);
                }));
            }
            Ok(out)
        })
    }
}
