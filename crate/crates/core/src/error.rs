use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by the command line front end to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Io,
    Schema,
    Numeric,
    Theorem,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("input error: {0}")]
    Input(String),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("unsupported format version `{found}` (expected `{expected}`)")]
    Version { found: String, expected: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("split error: {0}")]
    Split(String),
    #[error("degenerate feature: all values equal {value}")]
    DegenerateFeature { value: f64 },
    #[error("feature `{column}` is degenerate on the training rows (constant {value})")]
    DegenerateColumn { column: String, value: f64 },
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error("metric error: {0}")]
    Metric(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("absolute continuity violated at x = {witness}: P(X|Z=j) > 0 where P(X|Z=k) = 0")]
    AbsoluteContinuity { witness: String },
    #[error("bound check failed: {0}")]
    Theorem(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Io { .. }
            | Error::Input(_)
            | Error::Row { .. }
            | Error::Parse { .. }
            | Error::Version { .. } => ErrorCategory::Io,
            Error::Schema(_) => ErrorCategory::Schema,
            Error::Theorem(_) => ErrorCategory::Theorem,
            _ => ErrorCategory::Numeric,
        }
    }
}
