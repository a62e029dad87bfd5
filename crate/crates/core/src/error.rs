use thiserror::Error;

use crate::lp::LpError;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("loss `{loss}` is not supported by {operation}")]
    UnsupportedLoss {
        loss: String,
        operation: &'static str,
    },

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("instance {0:?} is not covered by the explicit feature table")]
    UnknownInstance(Vec<f64>),

    #[error(transparent)]
    Lp(#[from] LpError),

    #[error("hard-core certificate inconsistency: {0}")]
    Inconsistent(String),

    #[error("weights are not decorrelating (max constraint violation {violation:e})")]
    NotDecorrelating { violation: f64 },

    #[error("sample is not separable (best margin {margin:e})")]
    NotSeparable { margin: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
