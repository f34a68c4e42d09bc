use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification of errors, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Scorer,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {source_name} at line {line}, column {column}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("invalid split ratios: {0}")]
    SplitRatios(String),

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("cannot train on an empty sample set")]
    EmptyTrainingSet,

    #[error("missing {what} for sample {sample_id}")]
    MissingInput { what: &'static str, sample_id: String },

    #[error("invalid score for sample {sample_id}: {value}")]
    InvalidScore { sample_id: String, value: f64 },

    #[error("protocol error: {message} (offending line: {line})")]
    Protocol { message: String, line: String },

    #[error("scorer backend error: {0}")]
    Backend(String),

    #[error("scoring sample {sample_id} failed: {source}")]
    Sample {
        sample_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid curve: {0}")]
    Curve(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } | Error::Csv(_) => ErrorKind::Io,
            Error::Protocol { .. } | Error::Backend(_) => ErrorKind::Scorer,
            Error::Sample { source, .. } => source.kind(),
            Error::Config(_) => ErrorKind::Usage,
            _ => ErrorKind::Data,
        }
    }
}
