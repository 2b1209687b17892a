use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no training data for class `{0}`")]
    NoTrainingData(String),

    #[error("all proposals have been visited")]
    EpisodeExhausted,

    #[error("image `{image}`: field `{field}`: {reason}")]
    Validation {
        image: String,
        field: String,
        reason: String,
    },

    #[error("{path}:{line}: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },

    #[error("{path}: unsupported schema version {found} (expected {expected})")]
    SchemaVersion { path: PathBuf, found: u32, expected: u32 },

    #[error("config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn input(reason: impl Into<String>) -> Self {
        Error::InvalidInput(reason.into())
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            reason: reason.into(),
        }
    }

    /// True for errors caused by malformed or out-of-contract input data, as
    /// opposed to I/O or runtime failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::InvalidInput(_)
                | Error::NoTrainingData(_)
                | Error::Validation { .. }
                | Error::Parse { .. }
                | Error::SchemaVersion { .. }
                | Error::Config { .. }
                | Error::Json(_)
        )
    }
}
