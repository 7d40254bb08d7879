use thiserror::Error;

/// Errors raised by the library.
#[derive(Error, Debug)]
pub enum Error {
    /// A caller passed inconsistent arguments (shape mismatch, bad index, ...).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// The request is well formed but has no answer for this input,
    /// e.g. infeasible margins or temperature of a constant matrix.
    #[error("domain error: {0}")]
    Domain(String),

    /// The exact counter hit its memo-state cap.
    #[error("counting budget exceeded after {states} distinct states")]
    BudgetExceeded { states: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unsupported file version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("corrupted file: {0}")]
    Corrupted(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
