//! Define-by-run tape for reverse-mode differentiation of matrix programs.
//!
//! Every primitive appends a node holding its forward value and the handles
//! of its inputs. Because nodes can only refer to earlier nodes, the tape is
//! always in topological order and the backward sweep is a single reverse
//! pass over it.

use std::sync::Arc;

use super::matrix::gemm;
use super::{Matrix, SparseMatrix, TensorError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, f64),
    Mul(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Sin(Var),
    ConcatCols(Var, Var),
    SliceCols { src: Var, start: usize },
    MeanAbs(Var),
    Sum(Var),
    Propagate(Var, Arc<SparseMatrix>),
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
    grad: Option<Matrix>,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops every node and re-arms the tape for a new recording.
    pub fn reset(&mut self) {
        self.nodes.clear();
        self.consumed = false;
    }

    /// Discards every node recorded after `mark` (a value of [`len`](Self::len)).
    ///
    /// Handles created after the mark become invalid.
    pub fn truncate(&mut self, mark: usize) {
        self.nodes.truncate(mark);
    }

    pub fn leaf(&mut self, value: Matrix, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Matrix) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Matrix) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    /// Value of a 1×1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.as_slice()[0]
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient accumulated into a trainable leaf by the last [`backward`](Self::backward).
    pub fn grad(&self, v: Var) -> Option<&Matrix> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn take_grad(&mut self, v: Var) -> Option<Matrix> {
        self.nodes[v.0].grad.take()
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), TensorError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(TensorError::ShapeMismatch {
                op,
                left: sa,
                right: sb,
            });
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.same_shape("add", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y);
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.same_shape("sub", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x - y);
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::Sub(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a).map(|x| factor * x);
        let rg = self.any_grad(&[a]);
        self.push(value, Op::Scale(a, factor), rg)
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.same_shape("mul", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y);
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::Mul(a, b), rg))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        let rg = self.any_grad(&[a]);
        self.push(value, Op::Sigmoid(a), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        let rg = self.any_grad(&[a]);
        self.push(value, Op::Tanh(a), rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.max(0.0));
        let rg = self.any_grad(&[a]);
        self.push(value, Op::Relu(a), rg)
    }

    pub fn sin(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::sin);
        let rg = self.any_grad(&[a]);
        self.push(value, Op::Sin(a), rg)
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.0 != sb.0 {
            return Err(TensorError::ShapeMismatch {
                op: "concat_cols",
                left: sa,
                right: sb,
            });
        }
        let value = self.value(a).concat_cols(self.value(b));
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::ConcatCols(a, b), rg))
    }

    /// Columns `[start, end)` of `a`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var, TensorError> {
        let cols = self.shape(a).1;
        if start > end || end > cols {
            return Err(TensorError::BadSlice {
                start,
                end,
                shape: self.shape(a),
            });
        }
        let value = self.value(a).slice_cols(start, end);
        let rg = self.any_grad(&[a]);
        Ok(self.push(value, Op::SliceCols { src: a, start }, rg))
    }

    /// Mean of absolute values, a 1×1 result.
    pub fn mean_abs(&mut self, a: Var) -> Result<Var, TensorError> {
        if self.value(a).is_empty() {
            return Err(TensorError::Empty { op: "mean_abs" });
        }
        let value = Matrix::scalar(self.value(a).mean_abs());
        let rg = self.any_grad(&[a]);
        Ok(self.push(value, Op::MeanAbs(a), rg))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Matrix::scalar(self.value(a).sum());
        let rg = self.any_grad(&[a]);
        self.push(value, Op::Sum(a), rg)
    }

    /// Left-multiplies `a` by a constant sparse operator.
    pub fn propagate(&mut self, operator: &Arc<SparseMatrix>, a: Var) -> Result<Var, TensorError> {
        let value = operator.apply(self.value(a))?;
        let rg = self.any_grad(&[a]);
        Ok(self.push(value, Op::Propagate(a, Arc::clone(operator)), rg))
    }

    /// Sums `terms`, which must share one shape.
    pub fn add_all(&mut self, terms: &[Var]) -> Result<Var, TensorError> {
        let (&first, rest) = terms.split_first().ok_or(TensorError::Empty { op: "add_all" })?;
        rest.iter().try_fold(first, |acc, &t| self.add(acc, t))
    }

    /// Reverse sweep from a 1×1 `loss`, leaving gradients on every trainable leaf.
    ///
    /// Leaves that do not influence the loss receive an all-zero gradient. A tape
    /// can be swept once; record a new forward pass (or [`reset`](Self::reset))
    /// before calling this again.
    pub fn backward(&mut self, loss: Var) -> Result<(), TensorError> {
        if self.consumed {
            return Err(TensorError::TapeConsumed);
        }
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(TensorError::NonScalarLoss { shape });
        }
        self.consumed = true;

        let mut grads: Vec<Option<Matrix>> = Vec::with_capacity(loss.0 + 1);
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(Matrix::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {
                    self.nodes[i].grad = Some(g);
                }
                Op::MatMul(a, b) => {
                    let (a, b) = (*a, *b);
                    if self.requires_grad(a) {
                        let bv = &self.nodes[b.0].value;
                        let ga = slot(&mut grads, a, self.nodes[a.0].value.shape());
                        gemm(1.0, &g, false, bv, true, 1.0, ga);
                    }
                    if self.requires_grad(b) {
                        let av = &self.nodes[a.0].value;
                        let gb = slot(&mut grads, b, self.nodes[b.0].value.shape());
                        gemm(1.0, av, true, &g, false, 1.0, gb);
                    }
                }
                Op::Add(a, b) => {
                    let (a, b) = (*a, *b);
                    self.accumulate(&mut grads, a, 1.0, &g);
                    self.accumulate(&mut grads, b, 1.0, &g);
                }
                Op::Sub(a, b) => {
                    let (a, b) = (*a, *b);
                    self.accumulate(&mut grads, a, 1.0, &g);
                    self.accumulate(&mut grads, b, -1.0, &g);
                }
                Op::Scale(a, factor) => {
                    let (a, factor) = (*a, *factor);
                    self.accumulate(&mut grads, a, factor, &g);
                }
                Op::Mul(a, b) => {
                    let (a, b) = (*a, *b);
                    if self.requires_grad(a) {
                        let local = g.zip_map(&self.nodes[b.0].value, |x, y| x * y);
                        self.accumulate(&mut grads, a, 1.0, &local);
                    }
                    if self.requires_grad(b) {
                        let local = g.zip_map(&self.nodes[a.0].value, |x, y| x * y);
                        self.accumulate(&mut grads, b, 1.0, &local);
                    }
                }
                Op::Sigmoid(a) => {
                    let a = *a;
                    let local = g.zip_map(&node.value, |gv, s| gv * s * (1.0 - s));
                    self.accumulate(&mut grads, a, 1.0, &local);
                }
                Op::Tanh(a) => {
                    let a = *a;
                    let local = g.zip_map(&node.value, |gv, t| gv * (1.0 - t * t));
                    self.accumulate(&mut grads, a, 1.0, &local);
                }
                Op::Relu(a) => {
                    let a = *a;
                    let local =
                        g.zip_map(&self.nodes[a.0].value, |gv, x| if x > 0.0 { gv } else { 0.0 });
                    self.accumulate(&mut grads, a, 1.0, &local);
                }
                Op::Sin(a) => {
                    let a = *a;
                    let local = g.zip_map(&self.nodes[a.0].value, |gv, x| gv * x.cos());
                    self.accumulate(&mut grads, a, 1.0, &local);
                }
                Op::ConcatCols(a, b) => {
                    let (a, b) = (*a, *b);
                    let split = self.shape(a).1;
                    if self.requires_grad(a) {
                        let part = g.slice_cols(0, split);
                        self.accumulate(&mut grads, a, 1.0, &part);
                    }
                    if self.requires_grad(b) {
                        let part = g.slice_cols(split, g.cols());
                        self.accumulate(&mut grads, b, 1.0, &part);
                    }
                }
                Op::SliceCols { src, start } => {
                    let (src, start) = (*src, *start);
                    let width = g.cols();
                    let gs = slot(&mut grads, src, self.nodes[src.0].value.shape());
                    for r in 0..g.rows() {
                        for c in 0..width {
                            let cur = gs.get(r, start + c);
                            gs.set(r, start + c, cur + g.get(r, c));
                        }
                    }
                }
                Op::MeanAbs(a) => {
                    let a = *a;
                    let input = &self.nodes[a.0].value;
                    let scale = g.as_slice()[0] / input.len() as f64;
                    let local = input.map(|x| scale * sign(x));
                    self.accumulate(&mut grads, a, 1.0, &local);
                }
                Op::Sum(a) => {
                    let a = *a;
                    let (r, c) = self.shape(a);
                    let local = Matrix::filled(r, c, g.as_slice()[0]);
                    self.accumulate(&mut grads, a, 1.0, &local);
                }
                Op::Propagate(a, operator) => {
                    let a = *a;
                    if self.requires_grad(a) {
                        let operator = Arc::clone(operator);
                        let ga = slot(&mut grads, a, self.nodes[a.0].value.shape());
                        operator.apply_transpose_into(&g, ga)?;
                    }
                }
            }
        }

        for node in &mut self.nodes {
            if matches!(node.op, Op::Leaf) && node.requires_grad && node.grad.is_none() {
                let (r, c) = node.value.shape();
                node.grad = Some(Matrix::zeros(r, c));
            }
        }
        Ok(())
    }

    fn accumulate(&self, grads: &mut [Option<Matrix>], target: Var, alpha: f64, g: &Matrix) {
        if !self.requires_grad(target) {
            return;
        }
        match &mut grads[target.0] {
            Some(existing) => existing.axpy(alpha, g),
            empty @ None => {
                *empty = Some(if alpha == 1.0 {
                    g.clone()
                } else {
                    g.map(|v| alpha * v)
                });
            }
        }
    }
}

fn slot(grads: &mut [Option<Matrix>], target: Var, shape: (usize, usize)) -> &mut Matrix {
    grads[target.0].get_or_insert_with(|| Matrix::zeros(shape.0, shape.1))
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_at_zero() {
        let mut tape = Tape::new();
        let x = tape.param(Matrix::scalar(0.0));
        let y = tape.sigmoid(x);
        assert_eq!(tape.scalar(y), 0.5);
        let loss = tape.sum(y);
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(x).unwrap().as_slice(), &[0.25]);
    }

    #[test]
    fn mean_abs_value() {
        let mut tape = Tape::new();
        let x = tape.constant(Matrix::from_rows(&[[1.0, -2.0], [3.0, -4.0]]));
        let zero = tape.constant(Matrix::zeros(2, 2));
        let d = tape.sub(x, zero).unwrap();
        let m = tape.mean_abs(d).unwrap();
        assert_eq!(tape.scalar(m), 2.5);
    }

    #[test]
    fn square_gradient() {
        let mut tape = Tape::new();
        let x = tape.param(Matrix::scalar(3.0));
        let xx = tape.mul(x, x).unwrap();
        let loss = tape.sum(xx);
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(x).unwrap().as_slice(), &[6.0]);
    }

    #[test]
    fn unused_leaf_gets_zero_grad() {
        let mut tape = Tape::new();
        let x = tape.param(Matrix::scalar(2.0));
        let w = tape.param(Matrix::from_rows(&[[1.0, 2.0]]));
        let loss = tape.sum(x);
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(w).unwrap(), &Matrix::zeros(1, 2));
        assert_eq!(tape.grad(x).unwrap().as_slice(), &[1.0]);
    }

    #[test]
    fn backward_errors() {
        let mut tape = Tape::new();
        let x = tape.param(Matrix::zeros(2, 1));
        assert!(matches!(
            tape.backward(x),
            Err(TensorError::NonScalarLoss { shape: (2, 1) })
        ));
        let loss = tape.sum(x);
        tape.backward(loss).unwrap();
        assert!(matches!(tape.backward(loss), Err(TensorError::TapeConsumed)));
        tape.reset();
        let y = tape.param(Matrix::scalar(1.0));
        let loss = tape.sum(y);
        assert!(tape.backward(loss).is_ok());
    }

    #[test]
    fn shape_errors_name_the_shapes() {
        let mut tape = Tape::new();
        let a = tape.constant(Matrix::zeros(2, 3));
        let b = tape.constant(Matrix::zeros(2, 2));
        let msg = tape.matmul(a, b).unwrap_err().to_string();
        assert!(msg.contains("2x3") && msg.contains("2x2"), "{msg}");
        assert!(tape.add(a, b).is_err());
        assert!(tape.slice_cols(a, 2, 4).is_err());
    }

    #[test]
    fn relu_zero_has_zero_derivative() {
        let mut tape = Tape::new();
        let x = tape.param(Matrix::from_rows(&[[0.0, 1.0, -1.0]]));
        let r = tape.relu(x);
        let loss = tape.sum(r);
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(x).unwrap().as_slice(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn truncate_discards_later_nodes() {
        let mut tape = Tape::new();
        let x = tape.param(Matrix::scalar(1.0));
        let mark = tape.len();
        let _ = tape.scale(x, 2.0);
        assert_eq!(tape.len(), mark + 1);
        tape.truncate(mark);
        assert_eq!(tape.len(), mark);
    }
}
