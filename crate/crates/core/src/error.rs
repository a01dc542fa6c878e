use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{context}: node index out of range ({index} >= {num_nodes})")]
    NodeOutOfRange {
        context: String,
        index: usize,
        num_nodes: usize,
    },

    #[error("{context}: label out of range ({label} >= {num_classes})")]
    LabelOutOfRange {
        context: String,
        label: usize,
        num_classes: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("requested {requested} items but the eligible pool has only {pool}")]
    PoolTooSmall { requested: usize, pool: usize },

    #[error("training set is empty")]
    EmptyTrainSet,

    #[error("non-finite training loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("class {class} has {available} nodes but {required} are required")]
    ClassTooSmall {
        class: usize,
        available: usize,
        required: usize,
    },

    #[error("invariant violated: {0}")]
    Internal(String),
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

    pub(crate) fn config(message: impl Into<String>) -> Self {
        Error::InvalidConfig(message.into())
    }
}
