use thiserror::Error;

use crate::agog::ModelError;
use crate::autodiff::TensorError;
use crate::dynamics::DynamicsError;
use crate::graph::GraphError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("non-finite loss {value} at epoch {epoch}")]
    NonFiniteLoss { epoch: usize, value: f64 },
    #[error("{0}")]
    Incompatible(String),
    #[error("dataset has no {0} split")]
    MissingSplit(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error("checksum mismatch: header says {expected}, data hashes to {actual}")]
    Checksum { expected: String, actual: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// True for failures caused by numbers blowing up rather than by bad input.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::NonFiniteLoss { .. } => true,
            Error::Tensor(TensorError::NonFiniteGradient { .. }) => true,
            Error::Model(ModelError::NonFiniteState { .. }) => true,
            Error::Model(ModelError::Tensor(TensorError::NonFiniteGradient { .. })) => true,
            Error::Dynamics(e) => matches!(
                e,
                DynamicsError::NonFiniteState { .. }
                    | DynamicsError::StepUnderflow { .. }
                    | DynamicsError::TooManySteps { .. }
            ),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
