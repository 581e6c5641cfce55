use thiserror::Error;

use crate::model::Model;
use crate::trainer::EpochLog;

pub type Result<T, E = PuError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PuError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("backward called without a matching forward pass: {0}")]
    MissingForwardContext(String),

    #[error("invalid architecture: {0}")]
    Architecture(String),

    #[error("{0} loss has no usable derivative")]
    UnsupportedDerivative(&'static str),

    #[error("unknown loss kind `{0}`")]
    UnknownLoss(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty batch: {0}")]
    EmptyBatch(String),

    #[error("risk became non-finite at epoch {epoch}; training halted")]
    Diverged {
        epoch: usize,
        last_model: Box<Model>,
        logs: Vec<EpochLog>,
    },

    #[error("oracle undefined: {0}")]
    OracleUndefined(String),

    #[error("quadrature failed to reach tolerance {tolerance:e} on [{lo}, {hi}]")]
    Quadrature { lo: f64, hi: f64, tolerance: f64 },

    #[error("IDX format error: {0}")]
    Idx(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no negative-risk events in {replications} replications")]
    NoDefectEvents { replications: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
