use thiserror::Error;

/// Errors raised by grid construction, mass regularization and the solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum KgError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field has length {got}, grid expects {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("fractional order must be positive, got {0}")]
    InvalidAlpha(f64),
    #[error("regularization parameter must lie in (0, 1], got {0}")]
    InvalidEpsilon(f64),
    #[error("invalid mass specification: {0}")]
    InvalidMass(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("scheme {scheme} does not support {reason}")]
    UnsupportedScheme {
        scheme: &'static str,
        reason: String,
    },
    #[error("tridiagonal solve failed: {0}")]
    SingularSystem(String),
}

pub type Result<T> = std::result::Result<T, KgError>;
