use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the RUL pipeline.
///
/// Variants are grouped by the exit-code class the CLI maps them to:
/// input/data problems, usage/configuration mistakes, numeric failures,
/// and persistence corruption.
#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}: expected 26 numeric values, found {found}")]
    Format { row: usize, found: usize },

    #[error("line {line}: cannot parse {token:?} as {expected}")]
    Parse {
        line: usize,
        token: String,
        expected: &'static str,
    },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("corrupt model file: {0}")]
    Corruption(String),

    #[error("checksum mismatch: manifest {expected}, payload {actual}")]
    Checksum { expected: String, actual: String },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by malformed or inconsistent input data.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Format { .. }
                | Error::Parse { .. }
                | Error::Integrity(_)
                | Error::Data(_)
                | Error::Io { .. }
                | Error::Version { .. }
                | Error::Corruption(_)
                | Error::Checksum { .. }
                | Error::Json(_)
        )
    }

    /// True for caller mistakes: bad flags, bad configuration, misuse of an API.
    pub fn is_usage_error(&self) -> bool {
        matches!(self, Error::Usage(_) | Error::Config(_) | Error::Shape(_))
    }
}
