use std::path::PathBuf;

use crate::policy::Policy;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("surface is empty")]
    EmptySurface,

    #[error("transform is singular (|det| = {det:e})")]
    SingularTransform { det: f64 },

    #[error("mesh is degenerate: {0}")]
    DegenerateMesh(String),

    #[error("no mesh triangle is visible from the camera")]
    NothingVisible,

    #[error("depth map has no hit pixels")]
    EmptyDepth,

    #[error("point cloud sizes differ ({left} vs {right})")]
    SizeMismatch { left: usize, right: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("object {index}: {attempts} consecutive generation attempts produced an empty mesh")]
    RetryExhausted { index: usize, attempts: usize },

    #[error("evaluating policy {policy}: {source}")]
    Evaluation {
        policy: Policy,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Strips [`Error::Evaluation`] wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Evaluation { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
