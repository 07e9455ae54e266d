//! Learning continuous network dynamics from sparse, irregular snapshots.
//!
//! The crate covers the whole pipeline:
//!
//! - [`graph`]: benchmark network families and the normalized Laplacian;
//! - [`dynamics`]: ground-truth gene-regulation, Kuramoto and mutualistic
//!   dynamics, a Dormand–Prince reference integrator and dataset construction;
//! - [`autodiff`]: a small dense reverse-mode AD engine with Adam;
//! - [`agog`]: the autoregressive GNN-ODE-GRU model;
//! - [`baselines`]: NDCN and the temporal-GNN (GRU/LSTM/RNN) baselines;
//! - [`train`]: losses, training loops, evaluation tasks and experiment matrices;
//! - [`io`]: dataset, checkpoint, report and snapshot-grid file formats.

pub mod agog;
pub mod autodiff;
pub mod baselines;
pub mod dynamics;
pub mod graph;
pub mod io;
pub mod train;

mod error;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use agog::{AgogHyper, AgogParams, StepPolicy};
pub use autodiff::{Matrix, ParamSet, SparseMatrix, Tape, TensorError, Var};
pub use dynamics::{Dataset, DatasetConfig, DynamicsKind, DynamicsSpec, Protocol, SplitLabel};
pub use error::{Error, Result};
pub use graph::{generate_graph, normalized_laplacian, Graph, GraphFamily, GraphParams};
pub use train::{evaluate, train, ModelKind, Task, TrainConfig, TrainedModel};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Independent random streams derived from one user seed.
pub(crate) mod stream {
    pub const GRAPH: u64 = 1;
    pub const INITIAL_STATE: u64 = 2;
    pub const SCHEDULE: u64 = 3;
    pub const SPLIT: u64 = 4;
    pub const COEFFICIENTS: u64 = 5;
    pub const PARAM_INIT: u64 = 6;
}

pub(crate) fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
