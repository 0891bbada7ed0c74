use std::path::PathBuf;

use hyvid_core::collab::RevisionError;
use hyvid_core::model::Violation;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unreadable file {path}: {message}")]
    Unreadable { path: PathBuf, message: String },
    #[error("{kind} {id} not found")]
    NotFound { kind: &'static str, id: String },
    #[error("{kind} {id} already exists")]
    Duplicate { kind: &'static str, id: String },
    #[error("revision conflict: expected {expected}, stored {actual}")]
    Conflict { expected: u64, actual: u64 },
    #[error("validation failed: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Validation(Vec<Violation>),
    #[error("revision entries rejected: {0}")]
    Entries(#[from] RevisionError),
    #[error("revision entries do not reproduce the submitted annotations")]
    ReplayMismatch,
    #[error("field `{0}` of an existing set cannot change")]
    FieldChanged(&'static str),
    #[error("store is read-only: {0} set(s) failed the replay check at open")]
    ReadOnly(usize),
    #[error("unknown or missing token")]
    Unauthenticated,
    #[error("simulated crash")]
    InjectedCrash,
}

impl StoreError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        StoreError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = StoreError> = std::result::Result<T, E>;
