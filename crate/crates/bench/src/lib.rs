//! Fixtures shared by the kernel benchmarks.

use std::sync::Arc;

use dynetforge::dynamics::build_dataset;
use dynetforge::graph::{generate_graph, normalized_laplacian};
use dynetforge::{Dataset, DatasetConfig, DynamicsKind, GraphFamily, GraphParams, Matrix, Protocol, SparseMatrix};

/// Deterministic dense matrix with entries in `[-1, 1)`.
pub fn dense(rows: usize, cols: usize, salt: u64) -> Matrix {
    let mut state = salt.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    Matrix::from_fn(rows, cols, |_, _| {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 52) as f64 - 1.0
    })
}

/// Normalized Laplacian of an `n`-node grid as a sparse operator.
pub fn grid_laplacian(n: usize) -> Arc<SparseMatrix> {
    let g = generate_graph(GraphFamily::Grid, n, &GraphParams::default(), 0).expect("grid");
    Arc::new(SparseMatrix::from_dense(&normalized_laplacian(&g).phi).expect("square"))
}

/// Gene regulation on a grid, irregular protocol, 10% of snapshots for training.
pub fn gene_grid(n: usize) -> Dataset {
    build_dataset(&DatasetConfig::new(GraphFamily::Grid, DynamicsKind::Gene, n, Protocol::Irregular).with_seed(1))
        .expect("gene dataset")
}
