use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = FringeError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FringeError {
    #[error("invalid field dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },

    #[error("expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("dimension mismatch: {}x{} vs {}x{}", left.0, left.1, right.0, right.1)]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value in linear solve at inner iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("{solve} solve failed at outer iteration {outer}: {source}")]
    Solve {
        solve: &'static str,
        outer: usize,
        #[source]
        source: Box<FringeError>,
    },

    #[error("normalized error undefined: both signals are identically zero")]
    BothZero,

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl FringeError {
    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        FringeError::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FringeError::Io {
            path: path.into(),
            source,
        }
    }
}
