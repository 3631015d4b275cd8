use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by fitting, transforming, metrics and file I/O.
#[derive(Debug, Error)]
pub enum CbmapError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: String, right: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error("model version mismatch: expected version {expected}, found {found}")]
    ModelVersion { expected: u32, found: u32 },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CbmapError {
    pub(crate) fn shapes(left: (usize, usize), right: (usize, usize)) -> Self {
        CbmapError::DimensionMismatch {
            left: format!("{}x{}", left.0, left.1),
            right: format!("{}x{}", right.0, right.1),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CbmapError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CbmapError>;
