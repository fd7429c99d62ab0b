use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the analysis engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed NACT data: {0}")]
    Format(String),
    #[error("unsupported NACT version {0}")]
    UnsupportedVersion(u8),
    #[error("truncated NACT payload: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("estimator limit exceeded: {0}")]
    Limit(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("manifest parse error in {path}: {source}")]
    Manifest {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by arithmetic (NaN, divergence, degenerate fits).
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
