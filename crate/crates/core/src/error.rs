use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("line {line}: duplicate manuscript id {id:?}")]
    DuplicateId { line: usize, id: String },

    #[error("record {index}: {message}")]
    InvalidRecord { index: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("manuscript {0:?} has an empty shingle set")]
    EmptyShingleSet(String),

    #[error("signature mismatch: {0}")]
    SignatureMismatch(String),

    #[error("no shingle set for manuscript {0:?}")]
    MissingShingles(String),

    #[error("unknown manuscript id {0:?}")]
    UnknownId(String),

    #[error("snapshot format version {found} is not supported (expected {expected})")]
    SnapshotVersion { found: u32, expected: u32 },

    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),

    #[error("infeasible synthetic spec: {0}")]
    InfeasibleSynth(String),

    #[error("serialization error: {0}")]
    Serialization(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True when the error originates in configuration rather than data.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) => true,
            Error::Stage { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Serialization(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Serialization(err.to_string())
    }
}
