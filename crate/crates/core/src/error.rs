use std::path::PathBuf;

/// Errors produced by the landing-zone pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("raster too small: {width}x{height}, need at least {min}x{min}")]
    TooSmall {
        width: usize,
        height: usize,
        min: usize,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("refinement sequence exhausted at step {step} (limit {limit})")]
    SequenceExhausted { step: usize, limit: usize },

    #[error("refinement protocol violation: {0}")]
    Protocol(String),

    #[error("bad magic: expected {expected}, found {found:?}")]
    BadMagic {
        expected: &'static str,
        found: String,
    },

    #[error("malformed header: {0}")]
    BadHeader(String),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("declared dimensions overflow: {width}x{height}x{channels}")]
    DimensionOverflow {
        width: usize,
        height: usize,
        channels: usize,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("missing bundle entry `{0}`")]
    MissingEntry(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Coarse category used by front ends to pick an exit status.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Shape(_) | Error::TooSmall { .. } => ErrorKind::Shape,
            Error::Degenerate(_) => ErrorKind::Numeric,
            Error::SequenceExhausted { .. } | Error::Protocol(_) => ErrorKind::Shape,
            _ => ErrorKind::Input,
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Unreadable, malformed or out-of-range input.
    Input,
    /// Inconsistent dimensions or ordering between inputs.
    Shape,
    /// Numerically degenerate input (nothing valid to evaluate).
    Numeric,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
