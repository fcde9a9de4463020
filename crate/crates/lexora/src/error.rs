use std::path::PathBuf;

use thiserror::Error;

/// Error type shared across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed record: {msg}")]
    MalformedLine { path: PathBuf, line: usize, msg: String },

    #[error("duplicate document id {id:?}")]
    DuplicateId { id: String },

    #[error("unknown task {0:?}")]
    UnknownTask(String),

    #[error("unknown field {field:?} for task {task}")]
    UnknownField { task: String, field: String },

    #[error("task {task} cannot read documents of category {category}")]
    TaskMismatch { task: String, category: String },

    #[error("need {required} documents, only {available} available")]
    InsufficientDocs { required: usize, available: usize },

    #[error("rule for field {field:?} does not compile: {msg}")]
    BadPattern { field: String, msg: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
