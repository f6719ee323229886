use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice spec: {0}")]
    InvalidSpec(String),

    #[error("ground-state degeneracy broken: {0}")]
    Degeneracy(String),

    #[error("size mismatch: expected {expected} entries, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("faces {0} and {1} are not adjacent")]
    NotAdjacent(usize, usize),

    #[error("configuration with nonzero syndrome has no logical class ({0} charged faces)")]
    NonzeroSyndrome(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("rank-deficient design matrix for {0} fit")]
    RankDeficient(&'static str),

    #[error("need at least {need} data points, got {got}")]
    TooFewPoints { need: usize, got: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("run failed: {0}")]
    Runtime(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
