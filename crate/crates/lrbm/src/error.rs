//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Failure categories. The CLI maps these onto process exit codes:
/// usage problems exit 2, data problems exit 3, numerical problems exit 4.
#[derive(Debug, Error)]
pub enum Error {
    /// Shape or index contract violation (mismatched dimensions, bad slice index).
    #[error("dimension error: {0}")]
    Dimension(String),

    /// Invalid configuration or argument value.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A computation produced NaN or infinity, or a model left the
    /// normalizable region.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Model or request outside the exact-enumeration limits.
    #[error("exact enumeration limit exceeded: {0}")]
    LimitExceeded(String),

    /// Malformed or inconsistent dataset content.
    #[error("data error: {0}")]
    Data(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 usage, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) | Error::Dimension(_) | Error::LimitExceeded(_) => 2,
            Error::Data(_) | Error::Io(_) | Error::Json(_) | Error::Csv(_) => 3,
            Error::Numerical(_) => 4,
        }
    }
}
