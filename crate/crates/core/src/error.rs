use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("payload size mismatch: header declares {expected} bytes, file has {actual}")]
    PayloadSizeMismatch { expected: usize, actual: usize },
    #[error("unsupported dtype {0:?}")]
    UnsupportedDtype(String),
    #[error("invalid volume: {0}")]
    InvalidVolume(String),
    #[error("index {index} out of range for extent {extent}")]
    IndexOutOfRange { index: usize, extent: usize },
    #[error("seed {seed:?} outside volume of shape {shape:?}")]
    SeedOutOfBounds { seed: [usize; 3], shape: [usize; 3] },
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch([usize; 3], [usize; 3]),
    #[error("mask is empty")]
    EmptyMask,
    #[error("point set is empty")]
    EmptyInput,
    #[error("invalid prompt: {0}")]
    InvalidPrompt(String),
    #[error("backend does not support {0}")]
    CapabilityMissing(&'static str),
    #[error("backend failure: {0}")]
    Backend(String),
    #[error("backend protocol violation: {0}")]
    Protocol(String),
    #[error("backend did not answer within {0:?}")]
    Timeout(std::time::Duration),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("degenerate synthesis spec: {0}")]
    DegenerateSpec(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
