use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use hyvid_core::collab::CollabError;
use hyvid_core::interchange::{ExportError, ImportError};
use hyvid_core::model::{Violation, ViolationKind};
use hyvid_store::StoreError;
use serde::Serialize;

use crate::respond::canonical;

/// Machine-readable error codes. This list is closed; clients may match on
/// it exhaustively.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadRequest,
    Validation,
    InvalidFragment,
    ReplayMismatch,
    Unauthorized,
    ForbiddenRole,
    NotFound,
    RevisionConflict,
    Duplicate,
    PayloadTooLarge,
    UnsupportedMediaType,
    ReadOnly,
    Internal,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 13] = [
        ErrorCode::BadRequest,
        ErrorCode::Validation,
        ErrorCode::InvalidFragment,
        ErrorCode::ReplayMismatch,
        ErrorCode::Unauthorized,
        ErrorCode::ForbiddenRole,
        ErrorCode::NotFound,
        ErrorCode::RevisionConflict,
        ErrorCode::Duplicate,
        ErrorCode::PayloadTooLarge,
        ErrorCode::UnsupportedMediaType,
        ErrorCode::ReadOnly,
        ErrorCode::Internal,
    ];

    pub fn status(self) -> StatusCode {
        match self {
            ErrorCode::BadRequest
            | ErrorCode::Validation
            | ErrorCode::InvalidFragment
            | ErrorCode::ReplayMismatch => StatusCode::BAD_REQUEST,
            ErrorCode::Unauthorized => StatusCode::UNAUTHORIZED,
            ErrorCode::ForbiddenRole => StatusCode::FORBIDDEN,
            ErrorCode::NotFound => StatusCode::NOT_FOUND,
            ErrorCode::RevisionConflict | ErrorCode::Duplicate => StatusCode::CONFLICT,
            ErrorCode::PayloadTooLarge => StatusCode::PAYLOAD_TOO_LARGE,
            ErrorCode::UnsupportedMediaType => StatusCode::UNSUPPORTED_MEDIA_TYPE,
            ErrorCode::ReadOnly => StatusCode::SERVICE_UNAVAILABLE,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, thiserror::Error)]
#[error("{status} {code:?}: {message}")]
pub struct ApiError {
    pub status: u16,
    pub code: ErrorCode,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            status: code.status().as_u16(),
            code,
            message: message.into(),
            path: None,
        }
    }

    pub fn with_path(mut self, path: impl Into<String>) -> Self {
        self.path = Some(path.into());
        self
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::BadRequest, message)
    }

    pub fn validation(message: impl Into<String>, path: impl Into<String>) -> Self {
        Self::new(ErrorCode::Validation, message).with_path(path)
    }

    pub fn forbidden(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::ForbiddenRole, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::NotFound, message)
    }

    pub fn unauthorized() -> Self {
        Self::new(ErrorCode::Unauthorized, "missing or unknown bearer token")
    }

    /// First violation decides the code and path; the message lists all.
    pub fn from_violations(violations: &[Violation], prefix: &str) -> Self {
        let Some(first) = violations.first() else {
            return Self::new(ErrorCode::Validation, "validation failed");
        };
        let code = match first.kind {
            ViolationKind::Fragment(_) | ViolationKind::Region(_) => ErrorCode::InvalidFragment,
            _ => ErrorCode::Validation,
        };
        let message = violations
            .iter()
            .map(|v| format!("{prefix}{v}"))
            .collect::<Vec<_>>()
            .join("; ");
        Self::new(code, message).with_path(format!("{prefix}{}", first.path))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        canonical(status, &self)
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound { .. } => Self::not_found(e.to_string()),
            StoreError::Duplicate { .. } => Self::new(ErrorCode::Duplicate, e.to_string()),
            StoreError::Conflict { .. } => Self::new(ErrorCode::RevisionConflict, e.to_string()),
            StoreError::Validation(ref v) => Self::from_violations(v, ""),
            StoreError::Entries(_) => {
                Self::new(ErrorCode::ReplayMismatch, e.to_string()).with_path("entries")
            }
            StoreError::ReplayMismatch => {
                Self::new(ErrorCode::ReplayMismatch, e.to_string()).with_path("entries")
            }
            StoreError::FieldChanged(field) => Self::validation(e.to_string(), field),
            StoreError::ReadOnly(_) => Self::new(ErrorCode::ReadOnly, e.to_string()),
            StoreError::Unauthenticated => Self::unauthorized(),
            StoreError::Io { .. } | StoreError::Unreadable { .. } | StoreError::InjectedCrash => {
                tracing::error!(error = %e, "store failure");
                Self::new(ErrorCode::Internal, e.to_string())
            }
        }
    }
}

impl From<CollabError> for ApiError {
    fn from(e: CollabError) -> Self {
        Self::new(ErrorCode::Validation, e.to_string())
    }
}

impl From<ExportError> for ApiError {
    fn from(e: ExportError) -> Self {
        Self::new(ErrorCode::Internal, e.to_string())
    }
}

/// Store errors for a write whose set document sits under `prefix` in the
/// request body.
pub(crate) fn set_write_error(e: StoreError, prefix: &str) -> ApiError {
    match e {
        StoreError::Validation(ref v) => ApiError::from_violations(v, prefix),
        StoreError::FieldChanged(field) => {
            ApiError::validation(e.to_string(), format!("{prefix}{field}"))
        }
        other => other.into(),
    }
}

/// Import errors inside a request body, with paths rooted at `prefix`.
pub(crate) fn import_error(e: ImportError, prefix: &str) -> ApiError {
    match e {
        ImportError::Invalid(v) => ApiError::from_violations(&v, prefix),
        ImportError::Schema { path, message } => {
            ApiError::validation(message, format!("{prefix}{path}"))
        }
        other => ApiError::validation(other.to_string(), prefix.trim_end_matches('.')),
    }
}
