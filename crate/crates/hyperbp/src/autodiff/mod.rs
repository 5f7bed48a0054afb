//! Minimal reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! The decoding graph is rebuilt on a fresh [`Tape`] every training step
//! (shapes are data-independent but a dynamic tape keeps the builder simple).
//! Nodes are appended in topological order, so the backward pass is a single
//! reverse sweep that visits each node once. Only the op set needed by the
//! unrolled decoders is provided; the specialized ops (leave-one-out products,
//! the odd arctanh polynomial, gather/scatter for edge indexing) carry their
//! own exact backward rules.

mod adam;
mod ops;

pub use adam::{clip_grad_norm, AdamState};

use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GradError {
    #[error("{op}: shape mismatch: {msg}")]
    Shape { op: &'static str, msg: String },
    #[error("backward requires a scalar loss, got {numel} elements")]
    NonScalarLoss { numel: usize },
    #[error("backward was already run on this tape")]
    BackwardDone,
    #[error("node {0} has no gradient (not a parameter or unused)")]
    NoGradient(usize),
}

/// Dense row-major tensor of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "data length must match shape product"
        );
        Self { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![0.0; n] }
    }

    pub fn scalar(x: f64) -> Self {
        Self { shape: vec![1], data: vec![x] }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self { shape: vec![data.len()], data }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len());
        Self { shape: vec![rows, cols], data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn item(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "item() requires a single-element tensor");
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Identifier of a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub(crate) usize);

/// Segment layout for the leave-one-out product op: element `i` of the input
/// belongs to exactly one segment, and its output is the product of all other
/// elements of that segment. `offsets` has one extra trailing entry; segment
/// `s` covers `members[offsets[s]..offsets[s+1]]` (indices into the input).
#[derive(Debug, Clone)]
pub struct Segments {
    pub offsets: Vec<usize>,
    pub members: Vec<usize>,
}

impl Segments {
    pub fn num_segments(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn segment(&self, s: usize) -> &[usize] {
        &self.members[self.offsets[s]..self.offsets[s + 1]]
    }
}

#[derive(Debug, Clone)]
#[allow(dead_code)] // scalar payloads are kept for Debug output
pub(crate) enum Op {
    Leaf,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId, f64),
    MatMul(NodeId, NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Abs(NodeId),
    Log(NodeId),
    Clamp(NodeId, f64, f64),
    /// Raw `2 * atanh(x)`; infinities at the +-1 asymptotes propagate.
    Atanh2(NodeId),
    Gather(NodeId, Arc<Vec<usize>>),
    ScatterAdd(NodeId, Arc<Vec<usize>>),
    LooProduct(NodeId, Arc<Segments>),
    TaylorOddPoly(NodeId, usize),
    Concat(Vec<NodeId>),
    Sum(NodeId),
    Reshape(NodeId),
}

pub(crate) struct Node {
    pub value: Tensor,
    pub op: Op,
    pub needs_grad: bool,
}

/// The computation record. Build nodes with the op methods, then call
/// [`Tape::backward`] once on a scalar loss and read gradients back with
/// [`Tape::grad`].
#[derive(Default)]
pub struct Tape {
    pub(crate) nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
    backward_done: bool,
}

impl Tape {
    pub fn new() -> Self {
        Self { nodes: Vec::new(), grads: Vec::new(), backward_done: false }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Constant input: no gradient is tracked through it.
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf, false)
    }

    /// Trainable input: gradients accumulate here.
    pub fn param(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf, true)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Gradient of the loss w.r.t. node `id`; available after `backward` for
    /// any node on a path from a parameter to the loss.
    pub fn grad(&self, id: NodeId) -> Result<&Tensor, GradError> {
        self.grads.get(id.0).and_then(|g| g.as_ref()).ok_or(GradError::NoGradient(id.0))
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> NodeId {
        self.nodes.push(Node { value, op, needs_grad });
        NodeId(self.nodes.len() - 1)
    }

    pub(crate) fn push_op(&mut self, value: Tensor, op: Op, inputs: &[NodeId]) -> NodeId {
        let needs = inputs.iter().any(|&i| self.nodes[i.0].needs_grad);
        self.push(value, op, needs)
    }

    /// Reverse sweep from a scalar `loss`. Each tape supports exactly one
    /// backward pass; rebuild the graph for the next step.
    pub fn backward(&mut self, loss: NodeId) -> Result<(), GradError> {
        if self.backward_done {
            return Err(GradError::BackwardDone);
        }
        let numel = self.nodes[loss.0].value.numel();
        if numel != 1 {
            return Err(GradError::NonScalarLoss { numel });
        }
        self.backward_done = true;
        self.grads = (0..self.nodes.len()).map(|_| None).collect();
        self.grads[loss.0] = Some(Tensor::new(self.nodes[loss.0].value.shape().to_vec(), vec![1.0]));
        for i in (0..=loss.0).rev() {
            if self.grads[i].is_none() || !self.nodes[i].needs_grad {
                continue;
            }
            ops::backward_step(self, i);
        }
        Ok(())
    }

    pub(crate) fn accumulate(&mut self, target: NodeId, delta_fn: impl FnOnce(&mut [f64])) {
        if !self.nodes[target.0].needs_grad {
            return;
        }
        let shape = self.nodes[target.0].value.shape().to_vec();
        let slot = &mut self.grads[target.0];
        if slot.is_none() {
            *slot = Some(Tensor::zeros(shape));
        }
        delta_fn(slot.as_mut().unwrap().data_mut());
    }

    pub(crate) fn grad_of(&self, id: NodeId) -> Option<Tensor> {
        self.grads[id.0].clone()
    }
}

/// Central finite-difference gradient of `f` at `point`, one coordinate at a
/// time. The step `h` defaults to `1e-6` when given as `None`.
pub fn finite_difference_gradient<F>(mut f: F, point: &[f64], h: Option<f64>) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let h = h.unwrap_or(1e-6);
    let mut work = point.to_vec();
    let mut out = Vec::with_capacity(point.len());
    for i in 0..point.len() {
        work[i] = point[i] + h;
        let plus = f(&work);
        work[i] = point[i] - h;
        let minus = f(&work);
        work[i] = point[i];
        out.push((plus - minus) / (2.0 * h));
    }
    out
}

#[cfg(test)]
mod tests;
