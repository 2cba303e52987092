//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("hilbert-space dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("zero-length displacement: dipolar coupling requires |r| > 0")]
    ZeroDisplacement,

    #[error("non-hermitian operator (max asymmetry {max_asym:.3e}, scale {scale:.3e})")]
    NonHermitian { max_asym: f64, scale: f64 },

    #[error("unknown channel {0}")]
    UnknownChannel(String),

    #[error("pulse-count parity violation: {0}")]
    Parity(String),

    #[error("outside validity regime: {0}")]
    RegimeViolation(String),

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("quadrature did not converge: {0}")]
    QuadratureFailure(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config validation error: {0}")]
    ConfigValidation(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
