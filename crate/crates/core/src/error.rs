use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },

    #[error("{file}:{line}: {message}")]
    Malformed {
        file: String,
        line: usize,
        message: String,
    },

    #[error("{file}:{line}: unknown {kind} `{id}`")]
    DanglingReference {
        file: String,
        line: usize,
        kind: &'static str,
        id: String,
    },

    #[error("{file}:{line}: timestamp {timestamp} lies outside the {window_days}-day window ending at {window_end}")]
    OutsideWindow {
        file: String,
        line: usize,
        timestamp: i64,
        window_days: u32,
        window_end: i64,
    },

    #[error("manifest count mismatch for {entity}: manifest says {declared}, files contain {actual}")]
    ManifestMismatch {
        entity: &'static str,
        declared: usize,
        actual: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("track `{0}` is not covered by the embedding table")]
    UnknownTrack(String),

    #[error("skip-gram training produced NaN at epoch {epoch}, pair {pair}")]
    SkipGramDiverged { epoch: usize, pair: usize },

    #[error("ranker training diverged at epoch {epoch}, batch {batch}")]
    RankerDiverged { epoch: usize, batch: usize },

    #[error("test split is empty")]
    EmptyTestSet,

    #[error("reports cover different users")]
    MismatchedUsers,

    #[error("relevant set is empty for user {0}")]
    EmptyRelevant(u32),

    #[error("ranking has {len} items, fewer than k = {k}")]
    RankingTooShort { len: usize, k: usize },

    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(message: impl Into<String>) -> Self {
        Error::Config(message.into())
    }
}
