//! Reverse-mode automatic differentiation on a flat tape.
//!
//! Tensors are dense `f64` buffers (rank 1 or 2) owned by a [`Tape`].
//! Every operator records a backward step at execution time; [`Tape::backward`]
//! replays the steps in reverse insertion order, accumulating gradients into
//! every reachable tensor that requires them. Fan-out therefore sums
//! gradients rather than overwriting. The tape is single-use: one forward
//! graph, one backward sweep.

use std::cell::RefCell;

use thiserror::Error;

mod ops;

pub mod check;

/// Errors raised by tensor construction, operators, and the backward sweep.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum TensorError {
    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: unsupported shape {shape:?}")]
    UnsupportedShape { op: &'static str, shape: Vec<usize> },
    #[error("{op}: axis {axis} out of range for rank {rank}")]
    AxisOutOfRange {
        op: &'static str,
        axis: usize,
        rank: usize,
    },
    #[error("{op}: slice {index} is entirely -inf")]
    DegenerateSlice { op: &'static str, index: usize },
    #[error("{op}: reduction over zero elements")]
    EmptyReduction { op: &'static str },
    #[error("{op}: index {index} out of range for bound {bound}")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        bound: usize,
    },
    #[error("buffer length {got} does not match shape {shape:?} ({expected} elements)")]
    LengthMismatch {
        expected: usize,
        got: usize,
        shape: Vec<usize>,
    },
    #[error("backward requires a single-element tensor, got shape {shape:?}")]
    NotScalar { shape: Vec<usize> },
    #[error("unknown tensor id {0}")]
    UnknownId(usize),
}

/// Handle to a tensor on a [`Tape`]. Valid only for the tape that created it.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct TensorId(pub(crate) usize);

pub(crate) struct Node {
    shape: Vec<usize>,
    values: Vec<f64>,
    grad: Option<Vec<f64>>,
    requires_grad: bool,
}

pub(crate) struct Inner {
    nodes: Vec<Node>,
    steps: Vec<Box<dyn Fn(&mut Inner)>>,
}

/// Single-use computation tape. Operators take `&self`; interior state is
/// behind a `RefCell`, so a tape must stay on one thread.
pub struct Tape {
    inner: RefCell<Inner>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            inner: RefCell::new(Inner {
                nodes: Vec::new(),
                steps: Vec::new(),
            }),
        }
    }

    /// Constant tensor: participates in computation, receives no gradient.
    pub fn constant(&self, values: Vec<f64>, shape: Vec<usize>) -> Result<TensorId, TensorError> {
        self.push(values, shape, false)
    }

    /// Differentiable tensor: gradient is accumulated during backward.
    pub fn param(&self, values: Vec<f64>, shape: Vec<usize>) -> Result<TensorId, TensorError> {
        self.push(values, shape, true)
    }

    /// Single-element constant.
    pub fn scalar(&self, v: f64) -> TensorId {
        self.constant(vec![v], vec![1]).expect("scalar shape")
    }

    fn push(
        &self,
        values: Vec<f64>,
        shape: Vec<usize>,
        requires_grad: bool,
    ) -> Result<TensorId, TensorError> {
        let expected: usize = shape.iter().product();
        if values.len() != expected {
            return Err(TensorError::LengthMismatch {
                expected,
                got: values.len(),
                shape,
            });
        }
        if shape.is_empty() || shape.len() > 2 {
            return Err(TensorError::UnsupportedShape {
                op: "tensor",
                shape,
            });
        }
        let mut inner = self.inner.borrow_mut();
        let grad = requires_grad.then(|| vec![0.0; values.len()]);
        inner.nodes.push(Node {
            shape,
            values,
            grad,
            requires_grad,
        });
        Ok(TensorId(inner.nodes.len() - 1))
    }

    pub fn shape(&self, id: TensorId) -> Vec<usize> {
        self.inner.borrow().nodes[id.0].shape.clone()
    }

    pub fn value(&self, id: TensorId) -> Vec<f64> {
        self.inner.borrow().nodes[id.0].values.clone()
    }

    /// Value of a single-element tensor.
    pub fn value_scalar(&self, id: TensorId) -> f64 {
        let inner = self.inner.borrow();
        let n = &inner.nodes[id.0];
        assert_eq!(n.values.len(), 1, "value_scalar on non-scalar");
        n.values[0]
    }

    /// Accumulated gradient, or `None` for constants.
    pub fn grad(&self, id: TensorId) -> Option<Vec<f64>> {
        self.inner.borrow().nodes[id.0].grad.clone()
    }

    pub fn num_nodes(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    /// Reverse sweep from a single-element tensor. Consumes the recorded
    /// steps; at most one backward per tape.
    pub fn backward(&self, root: TensorId) -> Result<(), TensorError> {
        let steps = {
            let mut inner = self.inner.borrow_mut();
            let node = inner
                .nodes
                .get(root.0)
                .ok_or(TensorError::UnknownId(root.0))?;
            if node.values.len() != 1 {
                return Err(TensorError::NotScalar {
                    shape: node.shape.clone(),
                });
            }
            if let Some(g) = inner.nodes[root.0].grad.as_mut() {
                g[0] = 1.0;
            }
            std::mem::take(&mut inner.steps)
        };
        let mut inner = self.inner.borrow_mut();
        for step in steps.iter().rev() {
            step(&mut inner);
        }
        Ok(())
    }

    pub(crate) fn with_inner<R>(&self, f: impl FnOnce(&mut Inner) -> R) -> R {
        f(&mut self.inner.borrow_mut())
    }
}

impl Inner {
    pub(crate) fn node(&self, id: TensorId) -> Result<&Node, TensorError> {
        self.nodes.get(id.0).ok_or(TensorError::UnknownId(id.0))
    }

    pub(crate) fn shape_of(&self, id: TensorId) -> Result<Vec<usize>, TensorError> {
        Ok(self.node(id)?.shape.clone())
    }

    pub(crate) fn values_of(&self, id: TensorId) -> Result<Vec<f64>, TensorError> {
        Ok(self.node(id)?.values.clone())
    }

    pub(crate) fn requires(&self, id: TensorId) -> bool {
        self.nodes[id.0].requires_grad
    }

    /// Output-gradient read during backward; zeros if never touched.
    pub(crate) fn grad_vec(&self, id: TensorId) -> Vec<f64> {
        match &self.nodes[id.0].grad {
            Some(g) => g.clone(),
            None => vec![0.0; self.nodes[id.0].values.len()],
        }
    }

    /// Accumulate a gradient contribution; no-op for constants.
    pub(crate) fn acc(&mut self, id: TensorId, contrib: &[f64]) {
        let node = &mut self.nodes[id.0];
        if !node.requires_grad {
            return;
        }
        let g = node.grad.get_or_insert_with(|| vec![0.0; contrib.len()]);
        debug_assert_eq!(g.len(), contrib.len());
        for (gi, ci) in g.iter_mut().zip(contrib) {
            *gi += ci;
        }
    }

    pub(crate) fn push_result(&mut self, values: Vec<f64>, shape: Vec<usize>, req: bool) -> TensorId {
        debug_assert_eq!(values.len(), shape.iter().product::<usize>());
        let grad = req.then(|| vec![0.0; values.len()]);
        self.nodes.push(Node {
            shape,
            values,
            grad,
            requires_grad: req,
        });
        TensorId(self.nodes.len() - 1)
    }

    pub(crate) fn record(&mut self, step: Box<dyn Fn(&mut Inner)>) {
        self.steps.push(step);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backward_rejects_non_scalar() {
        let t = Tape::new();
        let x = t.param(vec![1.0, 2.0], vec![2]).unwrap();
        let err = t.backward(x).unwrap_err();
        assert!(matches!(err, TensorError::NotScalar { .. }));
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let t = Tape::new();
        let err = t.constant(vec![1.0, 2.0, 3.0], vec![2, 2]).unwrap_err();
        assert!(matches!(err, TensorError::LengthMismatch { .. }));
    }

    #[test]
    fn fan_out_accumulates() {
        // y = x + x; dy/dx = 2 via two accumulated contributions.
        let t = Tape::new();
        let x = t.param(vec![3.0], vec![1]).unwrap();
        let y = t.add(x, x).unwrap();
        t.backward(y).unwrap();
        assert_eq!(t.grad(x).unwrap(), vec![2.0]);
    }

    #[test]
    fn constants_receive_no_gradient() {
        let t = Tape::new();
        let x = t.param(vec![2.0], vec![1]).unwrap();
        let c = t.scalar(5.0);
        let y = t.mul(x, c).unwrap();
        t.backward(y).unwrap();
        assert_eq!(t.grad(x).unwrap(), vec![5.0]);
        assert!(t.grad(c).is_none());
    }
}
