use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: unsupported or unreadable image: {message}")]
    Image { path: PathBuf, message: String },

    #[error("image has zero width or height")]
    EmptyImage,

    #[error("invalid quad: {0}")]
    InvalidQuad(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("color correction: {0}")]
    ColorCorrection(String),

    #[error("invalid panel layout: {0}")]
    InvalidLayout(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("singular KKT system: {0}")]
    SingularSystem(String),

    #[error("SMO did not converge after {iterations} iterations (max KKT violation {violation:.3e})")]
    NotConverged { iterations: usize, violation: f64 },

    #[error("training failed for class pair ({first}, {second}): {source}")]
    PairTraining {
        first: String,
        second: String,
        #[source]
        source: Box<Error>,
    },

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("unknown class `{0}`")]
    UnknownClass(String),

    #[error("scene: {0}")]
    Scene(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
