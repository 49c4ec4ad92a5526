use thiserror::Error;

use crate::dataset::DatasetError;
use crate::dp::DpError;
use crate::krr::KrrError;

/// Errors raised by the test pipelines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TestError {
    #[error("residual products have (near) zero variance")]
    DegenerateVariance,
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Krr(#[from] KrrError),
    #[error(transparent)]
    Dp(#[from] DpError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}
