use axum::extract::FromRequestParts;
use axum::http::header;
use axum::http::request::Parts;
use hyvid_core::model::AnnotationSet;
use hyvid_store::{Role, User};

use crate::error::ApiError;
use crate::AppState;

/// An authenticated user. Rejects with 401 when the bearer token is missing
/// or unknown.
pub struct Caller(pub User);

/// Optional authentication for public reads. A token that is present but
/// unknown still rejects.
pub struct MaybeCaller(pub Option<User>);

fn bearer(parts: &Parts) -> Result<Option<&str>, ApiError> {
    let Some(value) = parts.headers.get(header::AUTHORIZATION) else {
        return Ok(None);
    };
    let value = value.to_str().map_err(|_| ApiError::unauthorized())?;
    match value.split_once(' ') {
        Some((scheme, token)) if scheme.eq_ignore_ascii_case("bearer") => Ok(Some(token.trim())),
        _ => Err(ApiError::unauthorized()),
    }
}

impl FromRequestParts<AppState> for Caller {
    type Rejection = ApiError;

    async fn from_request_parts(
        parts: &mut Parts,
        state: &AppState,
    ) -> Result<Self, Self::Rejection> {
        let token = bearer(parts)?.ok_or_else(ApiError::unauthorized)?;
        state
            .store
            .authenticate(token)
            .map(Caller)
            .map_err(|_| ApiError::unauthorized())
    }
}

impl FromRequestParts<AppState> for MaybeCaller {
    type Rejection = ApiError;

    async fn from_request_parts(
        parts: &mut Parts,
        state: &AppState,
    ) -> Result<Self, Self::Rejection> {
        match bearer(parts)? {
            None => Ok(MaybeCaller(None)),
            Some(token) => state
                .store
                .authenticate(token)
                .map(|u| MaybeCaller(Some(u)))
                .map_err(|_| ApiError::unauthorized()),
        }
    }
}

pub fn require_role(user: &User, allowed: &[Role], action: &str) -> Result<(), ApiError> {
    if allowed.contains(&user.role) {
        Ok(())
    } else {
        Err(ApiError::forbidden(format!(
            "role {} may not {action}",
            user.role.as_str()
        )))
    }
}

/// Read access to a set. Without `private_sets` every set is public. With it,
/// teachers read everything, other users read their own sets and merged
/// sets, and anonymous callers read nothing.
pub fn check_read(
    user: Option<&User>,
    set: &AnnotationSet,
    private_sets: bool,
) -> Result<(), ApiError> {
    if !private_sets {
        return Ok(());
    }
    let user = user.ok_or_else(ApiError::unauthorized)?;
    if user.role == Role::Teacher || user.id == set.owner || set.is_consolidated() {
        Ok(())
    } else {
        Err(ApiError::forbidden(format!(
            "set {} belongs to another user",
            set.id
        )))
    }
}

/// Write access: teachers write any set, learners only their own, viewers none.
pub fn check_write(user: &User, set: &AnnotationSet) -> Result<(), ApiError> {
    match user.role {
        Role::Teacher => Ok(()),
        Role::Learner if user.id == set.owner => Ok(()),
        Role::Learner => Err(ApiError::forbidden(format!(
            "set {} belongs to another user",
            set.id
        ))),
        Role::Viewer => Err(ApiError::forbidden("role viewer may not modify sets")),
    }
}
