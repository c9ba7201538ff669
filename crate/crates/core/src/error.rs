use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("fixed-point width {0} is outside 1..=32")]
    InvalidWidth(u32),

    #[error("value {raw} does not fit a {bits}-bit two's complement word")]
    OutOfRange { raw: i64, bits: u32 },

    #[error("format mismatch: {left}-bit vs {right}-bit operand")]
    FormatMismatch { left: u32, right: u32 },

    #[error("decay shift must be >= 1, got {0}")]
    InvalidShift(i64),

    /// Vector or matrix dimensions disagree with the declared topology.
    #[error("shape mismatch in {what}: expected {expected}, got {actual}")]
    Shape {
        what: String,
        expected: usize,
        actual: usize,
    },

    #[error("invalid argument: {0}")]
    Usage(String),

    /// A configuration document is malformed; `field` names the offending key.
    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported encoding `{0}`")]
    UnsupportedEncoding(String),

    #[error("HDL generation failed: {0}")]
    Generation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn shape(what: impl Into<String>, expected: usize, actual: usize) -> Self {
        Error::Shape {
            what: what.into(),
            expected,
            actual,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the input data rather than by the network description.
    pub fn is_data_error(&self) -> bool {
        matches!(self, Error::Shape { .. } | Error::Parse { .. })
    }
}
