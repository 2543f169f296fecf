use bmirelax_conic::ConicError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BmiError {
    /// Malformed or inconsistent input data.
    #[error("invalid input: {0}")]
    Input(String),

    #[error("{what} is not symmetric (relative asymmetry {rel:.3e})")]
    Asymmetric { what: String, rel: f64 },

    #[error("index {index} out of range for n = {n}")]
    Index { index: usize, n: usize },

    #[error(transparent)]
    Solver(#[from] ConicError),

    /// The conic solver returned without a usable solution.
    #[error("solver did not produce a solution ({status}): {context}")]
    SolveFailed { status: String, context: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("parse error at {field}: {message}")]
    Parse { field: String, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl BmiError {
    pub(crate) fn parse(field: impl Into<String>, message: impl Into<String>) -> Self {
        BmiError::Parse {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, BmiError>;
