//! Comparison models: NDCN (one continuous solve from the first observation)
//! and graph-convolutional recurrent networks for equally spaced sequences.

mod ndcn;
mod temporal;

pub use ndcn::{ndcn_forward, ndcn_loss, ndcn_predict, NdcnHyper, NdcnParams, NdcnVars};
pub use temporal::{
    temporal_gnn_forward, temporal_gnn_predict, CellKind, TemporalGnnHyper, TemporalGnnParams,
    TemporalVars,
};
