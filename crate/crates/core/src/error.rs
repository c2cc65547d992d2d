use alloc::string::String;

use crate::jc::DressedLabel;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid system parameters: {0}")]
    InvalidParams(String),
    #[error("truncation n_max = {n_max} too small: need at least {required}")]
    TruncationTooSmall { n_max: usize, required: usize },
    #[error("dressed label {0} is not part of the truncated basis")]
    UnknownLabel(DressedLabel),
    #[error("could not assign dressed labels: {0}")]
    LabelAssignment(String),
    #[error("invalid pulse: {0}")]
    InvalidPulse(String),
    #[error("time {t} ns outside pulse window [0, {duration}] ns")]
    TimeOutOfRange { t: f64, duration: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(
        "norm drift {drift:e} exceeds limit after {steps} steps of {dt} ns; reduce the step size"
    )]
    NormDrift { drift: f64, steps: usize, dt: f64 },
    #[error("non-finite objective value at evaluation {evaluation}")]
    NonFiniteObjective { evaluation: usize },
    #[error("no intermediate node for rotation ({j}, {k})")]
    NoIntermediate { j: usize, k: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
