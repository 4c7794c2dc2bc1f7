use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("parse error at {path}: {message}")]
    Structure { path: String, message: String },

    #[error("validation failed for {id}: {message}")]
    Validation { id: String, message: String },

    #[error("span {start}..{end} out of range for text of length {len}")]
    Range { start: i64, end: i64, len: usize },

    #[error("input sets do not join; missing ids: {}", missing.join(", "))]
    Join { missing: Vec<String> },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("not enough records: needed {needed}, got {available}")]
    Size { needed: usize, available: usize },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("backend {backend} failed: {message}")]
    Backend {
        backend: String,
        message: String,
        retriable: bool,
    },

    #[error("kappa undefined: expected agreement is 1")]
    UndefinedKappa,

    #[error("stage `{stage}` failed after {completed} records: {source}")]
    Stage {
        stage: String,
        completed: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn backend(backend: impl Into<String>, message: impl Into<String>, retriable: bool) -> Self {
        Error::Backend {
            backend: backend.into(),
            message: message.into(),
            retriable,
        }
    }

    pub fn is_retriable(&self) -> bool {
        match self {
            Error::Backend { retriable, .. } => *retriable,
            Error::Stage { source, .. } => source.is_retriable(),
            _ => false,
        }
    }

    /// Process exit code: 3 for backend failures, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Backend { .. } => 3,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}
