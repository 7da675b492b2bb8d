use std::path::PathBuf;

use thiserror::Error;

use crate::estimator::PartialTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid run parameters or model declaration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Caller passed arguments of the wrong shape or in the wrong state.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("non-finite value produced by layer {layer}")]
    Numeric { layer: usize },

    #[error("property value is not finite")]
    NonFiniteProperty,

    #[error("failed to load network{}: {reason}", layer.map(|l| format!(" (layer {l})")).unwrap_or_default())]
    Load { layer: Option<usize>, reason: String },

    /// The level sequence did not reach zero or the probability floor within
    /// the allowed number of levels.
    #[error("run diverged after {} levels without reaching the event or the probability floor", .0.levels.len())]
    Diverged(Box<PartialTrace>),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn dim_mismatch(what: &str, expected: usize, got: usize) -> Self {
        Error::Usage(format!("{what}: expected dimension {expected}, got {got}"))
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
