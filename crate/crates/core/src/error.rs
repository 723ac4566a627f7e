use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("run `{0}` has no samples")]
    EmptyRun(String),

    #[error("cannot fit a density to an empty sample")]
    EmptyInput,

    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),

    #[error("non-finite feature value {0}")]
    NonFinite(f64),

    #[error("training data is missing class {0}")]
    MissingClass(&'static str),

    #[error("run `{0}` is unlabeled and cannot be used for training or evaluation")]
    Unlabeled(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("model format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("invalid threshold table: {0}")]
    InvalidThresholds(String),

    #[error("invalid fuzzy system configuration: {0}")]
    InvalidFis(String),

    #[error("invalid archetype: {0}")]
    InvalidArchetype(String),

    #[error("invalid cross-validation setup: {0}")]
    InvalidFolds(String),

    #[error("no decisions to score")]
    NoDecisions,

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

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
