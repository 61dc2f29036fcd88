use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the simulator and analysis toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected} values, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("grid mismatch between fields")]
    GridMismatch,

    #[error("hermitian symmetry broken: deviation {deviation:e} exceeds tolerance {tolerance:e}")]
    HermitianViolation { deviation: f64, tolerance: f64 },

    #[error("degenerate spectrum profile: {0}")]
    DegenerateProfile(String),

    #[error("non-finite value in {field} (step {step}, t = {time})")]
    NonFinite {
        field: String,
        step: usize,
        time: f64,
    },

    #[error("maximum step count {max_steps} exceeded before t = {t_end}")]
    MaxStepsExceeded { max_steps: usize, t_end: f64 },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(
        "non-positive value {value:e} at t = {time} (field decayed to roundoff; shrink the window)"
    )]
    NonPositiveValue { time: f64, value: f64 },

    #[error(
        "quadrature failed to converge: estimated error {error:e} after {intervals} subintervals"
    )]
    QuadratureNonConvergence { error: f64, intervals: usize },

    #[error("empty validity window [{t_lo}, {t_hi}]: {hint}")]
    EmptyWindow { t_lo: f64, t_hi: f64, hint: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error("csv error: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
