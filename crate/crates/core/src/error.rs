use std::path::PathBuf;

use chrono::{DateTime, Utc};

/// Errors raised across the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("parse error at record {index}: {message}")]
    Parse { index: usize, message: String },

    #[error("column `{column}`: {message}")]
    Schema { column: String, message: String },

    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    #[error("insufficient coverage: missing {start} .. {end}")]
    Coverage {
        start: DateTime<Utc>,
        end: DateTime<Utc>,
    },

    #[error("origin {0} is not aligned between inputs")]
    Misaligned(DateTime<Utc>),

    #[error("non-finite activation in block {block}")]
    NonFinite { block: usize },

    #[error("training diverged at epoch {epoch}: {message}")]
    Diverged { epoch: usize, message: String },

    #[error("quantile values cross at index {index}; repair before scoring")]
    Crossing { index: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Shape { .. } => "shape",
            Error::Parse { .. } => "parse",
            Error::Schema { .. } => "schema",
            Error::Transport { .. } => "transport",
            Error::Coverage { .. } => "coverage",
            Error::Misaligned(_) => "misaligned",
            Error::NonFinite { .. } => "non_finite",
            Error::Diverged { .. } => "diverged",
            Error::Crossing { .. } => "crossing",
            Error::Empty(_) => "empty",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
