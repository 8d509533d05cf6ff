//! Crate-wide error type.

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor/layer shape disagreement.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An operation received an empty batch or dataset view.
    #[error("empty input: {0}")]
    Empty(String),

    /// Non-finite values encountered during forward/backward passes.
    #[error("numeric overflow: {0}")]
    NumericOverflow(String),

    /// Invalid configuration (bad hyperparameter, unknown strategy name, ...).
    #[error("config error: {0}")]
    Config(String),

    /// Malformed input file; `offset` is the byte position of the failure.
    #[error("parse error in {path} at byte {offset}: {message}")]
    Parse {
        path: String,
        offset: u64,
        message: String,
    },

    /// Semantically invalid data (label out of range, split shortfall, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// Filesystem failure, annotated with the touched path.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Exit code for the CLI: 2 for user/config mistakes, 3 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } | Error::Validation(_) => 2,
            _ => 3,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
