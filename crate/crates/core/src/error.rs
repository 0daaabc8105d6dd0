use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure modes of the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("structural error: {0}")]
    Structure(String),

    #[error("timing error: {0}")]
    Timing(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("filter design error: {0}")]
    FilterDesign(String),

    #[error("series too short: {len} samples, need more than {required}")]
    TooShort { len: usize, required: usize },

    #[error("correlation map for pair ({0}, {1}) has no defined cell")]
    EmptyMap(usize, usize),

    #[error("undefined score: {0}")]
    UndefinedScore(String),

    #[error("invalid configuration: {0}")]
    Config(String),

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
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
