//! Error type shared by every module.

use std::io;

/// Errors surfaced by the library and the command line front end.
#[derive(Debug, thiserror::Error)]
pub enum TlrError {
    /// Operand shapes do not agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An invalid parameter or parameter combination.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Input data that cannot be used, e.g. non-finite kernel entries.
    #[error("invalid data: {0}")]
    Data(String),

    /// A malformed or truncated file.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    /// A triangular factor has an exactly zero diagonal entry.
    #[error("singular triangular factor at index {index}")]
    Singular { index: usize },

    /// The factorization could not continue at tile column `column`.
    #[error("factorization aborted at tile column {column}: {reason}")]
    FactorizationAborted { column: usize, reason: String },

    /// Command line usage error.
    #[error("usage: {0}")]
    Usage(String),
}

impl TlrError {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            TlrError::Usage(_) | TlrError::Config(_) => 2,
            TlrError::Dimension(_)
            | TlrError::Data(_)
            | TlrError::Format(_)
            | TlrError::Io(_)
            | TlrError::Json(_)
            | TlrError::Csv(_) => 3,
            TlrError::Singular { .. } | TlrError::FactorizationAborted { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, TlrError>;

pub(crate) fn dim_err(msg: impl Into<String>) -> TlrError {
    TlrError::Dimension(msg.into())
}

pub(crate) fn config_err(msg: impl Into<String>) -> TlrError {
    TlrError::Config(msg.into())
}
