//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Two objects that must live on the same grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Newton (or a linear factorization) failed inside a time step.
    #[error("solver failure at step {step}: residual {residual:.3e} ({context})")]
    SolverFailure {
        step: usize,
        residual: f64,
        context: String,
    },

    /// A model assumption was violated at a probed point (e.g. f'(y) < 0).
    #[error("model violation: {0}")]
    ModelViolation(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("validation error for `{field}`: {msg}")]
    Validation { field: String, msg: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn grid_mismatch(what: impl Into<String>) -> Self {
        Error::GridMismatch(what.into())
    }

    pub fn invalid(what: impl Into<String>) -> Self {
        Error::InvalidArgument(what.into())
    }

    pub fn validation(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            msg: msg.into(),
        }
    }
}
