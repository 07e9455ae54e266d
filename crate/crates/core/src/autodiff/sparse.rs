use super::{Matrix, TensorError};

/// Constant square operator in compressed-row form.
///
/// Graph operators such as the normalized Laplacian are dense in the API but
/// have only `O(edges)` nonzeros; applying them through this form keeps each
/// propagation linear in the edge count.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    size: usize,
    row_start: Vec<usize>,
    col_index: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Compresses a dense square matrix, keeping entries that are not exactly zero.
    pub fn from_dense(dense: &Matrix) -> Result<Self, TensorError> {
        if dense.rows() != dense.cols() {
            return Err(TensorError::NotSquare {
                shape: dense.shape(),
            });
        }
        let size = dense.rows();
        let mut row_start = Vec::with_capacity(size + 1);
        let mut col_index = Vec::new();
        let mut values = Vec::new();
        row_start.push(0);
        for r in 0..size {
            for (c, &v) in dense.row(r).iter().enumerate() {
                if v != 0.0 {
                    col_index.push(c);
                    values.push(v);
                }
            }
            row_start.push(col_index.len());
        }
        Ok(Self {
            size,
            row_start,
            col_index,
            values,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn to_dense(&self) -> Matrix {
        let mut out = Matrix::zeros(self.size, self.size);
        for r in 0..self.size {
            for idx in self.row_start[r]..self.row_start[r + 1] {
                out.set(r, self.col_index[idx], self.values[idx]);
            }
        }
        out
    }

    /// `self * x`
    pub fn apply(&self, x: &Matrix) -> Result<Matrix, TensorError> {
        self.check(x)?;
        let cols = x.cols();
        let mut out = Matrix::zeros(self.size, cols);
        let src = x.as_slice();
        let dst = out.as_mut_slice();
        for r in 0..self.size {
            let out_row = &mut dst[r * cols..(r + 1) * cols];
            for idx in self.row_start[r]..self.row_start[r + 1] {
                let w = self.values[idx];
                let c = self.col_index[idx];
                for (o, v) in out_row.iter_mut().zip(&src[c * cols..(c + 1) * cols]) {
                    *o += w * v;
                }
            }
        }
        Ok(out)
    }

    /// `out += selfᵀ * g`, used to push gradients back through [`apply`](Self::apply).
    pub fn apply_transpose_into(&self, g: &Matrix, out: &mut Matrix) -> Result<(), TensorError> {
        self.check(g)?;
        if out.shape() != g.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "propagate_transpose",
                left: out.shape(),
                right: g.shape(),
            });
        }
        let cols = g.cols();
        let src = g.as_slice();
        let dst = out.as_mut_slice();
        for r in 0..self.size {
            let g_row = &src[r * cols..(r + 1) * cols];
            for idx in self.row_start[r]..self.row_start[r + 1] {
                let w = self.values[idx];
                let c = self.col_index[idx];
                for (o, v) in dst[c * cols..(c + 1) * cols].iter_mut().zip(g_row) {
                    *o += w * v;
                }
            }
        }
        Ok(())
    }

    fn check(&self, x: &Matrix) -> Result<(), TensorError> {
        if x.rows() != self.size {
            return Err(TensorError::ShapeMismatch {
                op: "propagate",
                left: (self.size, self.size),
                right: x.shape(),
            });
        }
        Ok(())
    }
}
