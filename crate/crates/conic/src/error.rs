use thiserror::Error;

/// Errors raised while assembling or solving a conic program.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConicError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid cone block: {0}")]
    InvalidCone(String),

    #[error("invalid solver settings: {0}")]
    Settings(String),

    #[error("eigendecomposition did not converge on a {0}x{0} block")]
    EigenFailure(usize),

    #[error("unknown cone block id {id} (program has {count} blocks)")]
    UnknownBlock { id: usize, count: usize },

    #[error("no dual information available for solver status {0}")]
    NoDual(String),
}

pub type Result<T> = std::result::Result<T, ConicError>;
