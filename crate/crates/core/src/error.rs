use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad input: out-of-range values, inconsistent shapes, missing columns.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV header in {path}: {message}")]
    Header { path: PathBuf, message: String },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),

    /// Numerical breakdown (non-SPD matrices, non-finite values mid-computation).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("columns are collinear: {columns:?} (condition number {condition:.3e})")]
    Collinear { columns: Vec<String>, condition: f64 },

    #[error("Firth fit did not converge after {iterations} iterations (max |score| {max_score:.3e}, last step {last_step:.3e})")]
    NonConvergence {
        iterations: usize,
        max_score: f64,
        last_step: f64,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the caller's inputs rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation(_) | Error::Header { .. } | Error::Config(_) | Error::Io { .. }
        )
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}
