use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed id {0:?}: expected 1-64 chars of [a-z0-9_-]")]
    MalformedId(String),

    #[error("missing required field `{0}`")]
    MissingField(&'static str),

    #[error("unknown {what} {value:?}")]
    Unknown { what: &'static str, value: String },

    #[error("invariant violated on {id}: {message}")]
    Invariant { id: String, message: String },

    #[error("{0} not found")]
    NotFound(String),

    #[error("{id} is a {found}, expected a {expected}")]
    KindMismatch {
        id: String,
        expected: &'static str,
        found: &'static str,
    },

    #[error("{0} already exists (use overwrite to replace it)")]
    AlreadyExists(String),

    #[error("{id} is still referenced by {by}")]
    StillReferenced { id: String, by: String },

    #[error("case directory is locked by another writer ({0})")]
    Locked(PathBuf),

    #[error("duplicate documentation timestamp {0}")]
    DuplicateTimestamp(i64),

    #[error("data error: {0}")]
    Data(String),

    #[error("technique `{technique}` failed: {message}")]
    Technique { technique: String, message: String },

    #[error("render error: {0}")]
    Render(String),

    #[error("case has {count} validation error(s), first: {first}")]
    ValidationFailed { count: usize, first: String },

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invariant(id: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invariant {
            id: id.into(),
            message: message.into(),
        }
    }

    pub(crate) fn data(message: impl Into<String>) -> Self {
        Error::Data(message.into())
    }
}
