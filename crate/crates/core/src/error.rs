use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("row {row}: expected 42 or 43 fields, found {found}")]
    FieldCount { row: usize, found: usize },

    #[error("row {row}, column {column} ({name}): {message}")]
    Cell {
        row: usize,
        column: usize,
        name: String,
        message: String,
    },

    #[error("unknown attack name {0:?}")]
    UnknownAttack(String),

    #[error("row {row}: {source}")]
    Row {
        row: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("dataset is empty")]
    Empty,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("length mismatch: {left} vs {right}")]
    Length { left: usize, right: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("inconsistent class counts: {0}")]
    InconsistentCounts(String),

    #[error("numeric failure: {0}")]
    NonFinite(String),

    #[error("ROC curve undefined: {0}")]
    DegenerateLabels(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("pipeline digest mismatch: model expects {expected}, pipeline is {found}")]
    DigestMismatch { expected: String, found: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by numerical breakdown rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFinite(_))
    }
}
