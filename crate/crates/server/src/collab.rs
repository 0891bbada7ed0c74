use axum::extract::{Path, State};
use axum::response::Response;
use hyvid_core::collab::{self, EntryDraft, MergePolicy, DEFAULT_TOLERANCE_MS};
use hyvid_core::model::{AnnotationSet, Millis, SetId, Timestamp, UserId, VideoId};
use hyvid_store::{Role, StoreError, User};
use serde::Deserialize;

use crate::auth::{check_read, require_role, Caller};
use crate::error::{ApiError, ErrorCode};
use crate::respond::{created, ok, JsonBody};
use crate::AppState;

fn load(
    state: &AppState,
    user: &User,
    sid: &SetId,
    field: &str,
) -> Result<AnnotationSet, ApiError> {
    let set = state.store.get_set(sid).map_err(|e| match e {
        StoreError::NotFound { .. } => ApiError::not_found(e.to_string()).with_path(field),
        other => other.into(),
    })?;
    check_read(Some(user), &set, state.private_sets)?;
    Ok(set)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffRequest {
    set_a: SetId,
    set_b: SetId,
    #[serde(default = "default_tolerance")]
    tolerance_ms: Millis,
}

fn default_tolerance() -> Millis {
    DEFAULT_TOLERANCE_MS
}

pub async fn diff(
    State(state): State<AppState>,
    Caller(user): Caller,
    JsonBody(req): JsonBody<DiffRequest>,
) -> Result<Response, ApiError> {
    let a = load(&state, &user, &req.set_a, "set_a")?;
    let b = load(&state, &user, &req.set_b, "set_b")?;
    let report = collab::diff_pair(&a, &b, req.tolerance_ms)
        .map_err(|e| ApiError::from(e).with_path("tolerance_ms"))?;
    Ok(ok(&report))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MergeRequest {
    set_ids: Vec<SetId>,
    policy: MergePolicy,
    #[serde(default)]
    save_as_owner: Option<UserId>,
    #[serde(default)]
    save_as_id: Option<SetId>,
}

pub async fn merge_sets(
    State(state): State<AppState>,
    Caller(user): Caller,
    Path(vid): Path<VideoId>,
    JsonBody(req): JsonBody<MergeRequest>,
) -> Result<Response, ApiError> {
    state.store.get_video(&vid)?;
    let mut sets = Vec::with_capacity(req.set_ids.len());
    for (i, sid) in req.set_ids.iter().enumerate() {
        let set = load(&state, &user, sid, &format!("set_ids[{i}]"))?;
        if set.video_id != vid {
            return Err(ApiError::validation(
                format!("set {sid} is over video {}", set.video_id),
                format!("set_ids[{i}]"),
            ));
        }
        sets.push(set);
    }
    let result =
        collab::merge(&sets, &req.policy).map_err(|e| ApiError::from(e).with_path("policy"))?;

    let Some(owner) = req.save_as_owner else {
        if req.save_as_id.is_some() {
            return Err(ApiError::validation(
                "save_as_id requires save_as_owner",
                "save_as_owner",
            ));
        }
        return Ok(ok(&result));
    };
    if owner != user.id {
        require_role(&user, &[Role::Teacher], "save merged sets for other users")?;
    }
    require_role(&user, &[Role::Teacher, Role::Learner], "save merged sets")?;
    state
        .store
        .get_user(&owner)
        .map_err(|_| ApiError::validation(format!("unknown user {owner}"), "save_as_owner"))?;
    let id = match req.save_as_id {
        Some(id) if !id.is_well_formed() => {
            return Err(ApiError::validation(
                format!("malformed id {id:?}"),
                "save_as_id",
            ))
        }
        Some(id) => id,
        None => free_merged_id(&state, &vid),
    };
    if state.store.get_set(&id).is_ok() {
        return Err(
            ApiError::new(ErrorCode::Duplicate, format!("set {id} already exists"))
                .with_path("save_as_id"),
        );
    }
    let now = Timestamp::now();
    let entries: Vec<EntryDraft> = result
        .merged
        .iter()
        .map(|a| EntryDraft::add(user.id.clone(), now, a.clone()))
        .collect();
    let set = result.clone().into_set(id.clone(), vid, owner);
    state.store.put_set(set, 0, entries)?;
    Ok(created(&format!("/api/sets/{id}"), &result))
}

fn free_merged_id(state: &AppState, vid: &VideoId) -> SetId {
    (1..)
        .map(|n| {
            if n == 1 {
                SetId::new(format!("{vid}-merged"))
            } else {
                SetId::new(format!("{vid}-merged-{n}"))
            }
        })
        .find(|id| state.store.get_set(id).is_err())
        .expect("unbounded search")
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradeRequest {
    learner_set: SetId,
    key_set: SetId,
    #[serde(default = "default_tolerance")]
    tolerance_ms: Millis,
}

pub async fn grade(
    State(state): State<AppState>,
    Caller(user): Caller,
    JsonBody(req): JsonBody<GradeRequest>,
) -> Result<Response, ApiError> {
    require_role(&user, &[Role::Teacher], "grade sets")?;
    let learner = load(&state, &user, &req.learner_set, "learner_set")?;
    let key = load(&state, &user, &req.key_set, "key_set")?;
    let report = collab::grade(&learner, &key, req.tolerance_ms)
        .map_err(|e| ApiError::from(e).with_path("tolerance_ms"))?;
    Ok(ok(&report))
}
