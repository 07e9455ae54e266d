//! Dense-matrix reverse-mode automatic differentiation.
//!
//! [`Tape`] records a define-by-run computation over [`Matrix`] values; a
//! call to [`Tape::backward`] fills in gradients for trainable leaves, and
//! [`adam_step`] applies them to a [`ParamSet`].

mod adam;
mod matrix;
mod sparse;
mod tape;

use thiserror::Error;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use matrix::Matrix;
pub use sparse::SparseMatrix;
pub use tape::{Tape, Var};

#[cfg(test)]
pub(crate) use tape::sigmoid;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("{op}: incompatible shapes {}x{} and {}x{}", left.0, left.1, right.0, right.1)]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("buffer of length {len} cannot form a {rows}x{cols} matrix")]
    BadLength { rows: usize, cols: usize, len: usize },
    #[error("expected a square matrix, got {}x{}", shape.0, shape.1)]
    NotSquare { shape: (usize, usize) },
    #[error("column slice {start}..{end} out of range for {}x{}", shape.0, shape.1)]
    BadSlice {
        start: usize,
        end: usize,
        shape: (usize, usize),
    },
    #[error("{op} of an empty input")]
    Empty { op: &'static str },
    #[error("backward needs a 1x1 loss, got {}x{}", shape.0, shape.1)]
    NonScalarLoss { shape: (usize, usize) },
    #[error("tape already swept; record a new forward pass before calling backward again")]
    TapeConsumed,
    #[error("non-finite gradient for parameter `{param}`")]
    NonFiniteGradient { param: String },
    #[error("{grads} gradients supplied for {params} parameters")]
    ParamCount { params: usize, grads: usize },
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
}

/// Ordered collection of named trainable tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    entries: Vec<(String, Matrix)>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, value: Matrix) {
        self.entries.push((name.into(), value));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.entries.iter().map(|(n, m)| (n.as_str(), m))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn get(&self, index: usize) -> &Matrix {
        &self.entries[index].1
    }

    pub fn get_mut(&mut self, index: usize) -> &mut Matrix {
        &mut self.entries[index].1
    }

    pub fn index_of(&self, name: &str) -> Result<usize, TensorError> {
        self.entries
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| TensorError::UnknownParam(name.to_string()))
    }

    pub fn by_name(&self, name: &str) -> Result<&Matrix, TensorError> {
        Ok(self.get(self.index_of(name)?))
    }

    pub fn by_name_mut(&mut self, name: &str) -> Result<&mut Matrix, TensorError> {
        let i = self.index_of(name)?;
        Ok(self.get_mut(i))
    }

    /// Total scalar parameter count.
    pub fn numel(&self) -> usize {
        self.entries.iter().map(|(_, m)| m.len()).sum()
    }

    /// Records every tensor on `tape` as a trainable leaf, in order.
    pub fn bind(&self, tape: &mut Tape) -> BoundParams {
        BoundParams {
            vars: self
                .entries
                .iter()
                .map(|(_, m)| tape.param(m.clone()))
                .collect(),
            names: self.entries.iter().map(|(n, _)| n.clone()).collect(),
        }
    }
}

/// Tape handles for a [`ParamSet`], aligned with its order.
#[derive(Clone, Debug)]
pub struct BoundParams {
    vars: Vec<Var>,
    names: Vec<String>,
}

impl BoundParams {
    pub fn var(&self, name: &str) -> Result<Var, TensorError> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.vars[i])
            .ok_or_else(|| TensorError::UnknownParam(name.to_string()))
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    /// Moves the gradients off the tape after a backward sweep, in parameter order.
    pub fn take_grads(&self, tape: &mut Tape) -> Vec<Matrix> {
        self.vars
            .iter()
            .map(|&v| {
                tape.take_grad(v).unwrap_or_else(|| {
                    let (r, c) = tape.shape(v);
                    Matrix::zeros(r, c)
                })
            })
            .collect()
    }
}
