use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::Response;
use hyvid_core::collab::{EntryDraft, RevisionError};
use hyvid_core::interchange::{
    export_csv, export_log_json, export_set_json, export_webvtt, import_set_json, SetDocument,
    DEFAULT_POINT_PADDING_MS,
};
use hyvid_core::model::{
    normalize_tags, Annotation, AnnotationId, AnnotationSet, Body, Millis, SetId, TimeFragment,
    Timestamp, UserId, VideoId,
};
use hyvid_store::{Role, StoreError, User};
use serde::{Deserialize, Serialize};

use crate::auth::{check_read, check_write, require_role, Caller, MaybeCaller};
use crate::error::{import_error, set_write_error, ApiError, ErrorCode};
use crate::respond::{bytes_response, created, ok, JsonBody, JSON};
use crate::AppState;

fn readable(state: &AppState, user: Option<&User>, sid: &SetId) -> Result<AnnotationSet, ApiError> {
    let set = state.store.get_set(sid)?;
    check_read(user, &set, state.private_sets)?;
    Ok(set)
}

fn document(state: &AppState, sid: &SetId) -> Result<Response, ApiError> {
    Ok(bytes_response(
        StatusCode::OK,
        JSON,
        state.store.set_json(sid)?,
    ))
}

pub async fn list_sets(
    State(state): State<AppState>,
    MaybeCaller(user): MaybeCaller,
    Path(vid): Path<VideoId>,
) -> Result<Response, ApiError> {
    let video = state.store.get_video(&vid)?;
    let docs: Vec<SetDocument> = state
        .store
        .list_sets(&vid)
        .iter()
        .filter(|s| check_read(user.as_ref(), s, state.private_sets).is_ok())
        .map(|s| SetDocument::new(s, &video))
        .collect();
    Ok(ok(&docs))
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CreateSet {
    #[serde(default)]
    id: Option<SetId>,
    #[serde(default)]
    owner: Option<UserId>,
}

/// First free id of the form `base`, `base-2`, `base-3`, ...
fn free_set_id(state: &AppState, base: &str) -> SetId {
    (1..)
        .map(|n| {
            if n == 1 {
                SetId::new(base)
            } else {
                SetId::new(format!("{base}-{n}"))
            }
        })
        .find(|id| state.store.get_set(id).is_err())
        .expect("unbounded search")
}

pub async fn create_set(
    State(state): State<AppState>,
    Caller(user): Caller,
    Path(vid): Path<VideoId>,
    JsonBody(body): JsonBody<CreateSet>,
) -> Result<Response, ApiError> {
    require_role(
        &user,
        &[Role::Teacher, Role::Learner],
        "create annotation sets",
    )?;
    state.store.get_video(&vid)?;
    let owner = body.owner.unwrap_or_else(|| user.id.clone());
    if owner != user.id {
        require_role(&user, &[Role::Teacher], "create sets for other users")?;
        state
            .store
            .get_user(&owner)
            .map_err(|_| ApiError::validation(format!("unknown user {owner}"), "owner"))?;
    }
    let id = match body.id {
        Some(id) if !id.is_well_formed() => {
            return Err(ApiError::validation(format!("malformed id {id:?}"), "id"))
        }
        Some(id) => id,
        None => free_set_id(&state, &format!("{vid}-{owner}")),
    };
    let set = state.store.create_set(id, vid, owner)?;
    let bytes = state.store.set_json(&set.id)?;
    let mut resp = bytes_response(StatusCode::CREATED, JSON, bytes);
    if let Ok(loc) = format!("/api/sets/{}", set.id).parse() {
        resp.headers_mut().insert(axum::http::header::LOCATION, loc);
    }
    Ok(resp)
}

pub async fn get_set(
    State(state): State<AppState>,
    MaybeCaller(user): MaybeCaller,
    Path(sid): Path<SetId>,
) -> Result<Response, ApiError> {
    readable(&state, user.as_ref(), &sid)?;
    document(&state, &sid)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PutSet {
    set: serde_json::Value,
    expected_revision: u64,
    #[serde(default)]
    entries: Vec<EntryDraft>,
}

pub async fn put_set(
    State(state): State<AppState>,
    Caller(user): Caller,
    Path(sid): Path<SetId>,
    JsonBody(body): JsonBody<PutSet>,
) -> Result<Response, ApiError> {
    let bytes = serde_json::to_vec(&body.set).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let imported = import_set_json(&bytes).map_err(|e| import_error(e, "set."))?;
    let set = imported.set;
    if set.id != sid {
        return Err(ApiError::validation(
            format!("set id {} does not match the URL", set.id),
            "set.id",
        ));
    }
    let video = state.store.get_video(&set.video_id).map_err(|_| {
        ApiError::validation(format!("unknown video {}", set.video_id), "set.video.id")
    })?;
    if video != imported.video {
        return Err(ApiError::validation(
            "video reference differs from the stored video",
            "set.video",
        ));
    }
    match state.store.get_set(&sid) {
        Ok(existing) => check_write(&user, &existing)?,
        Err(StoreError::NotFound { .. }) => {
            require_role(
                &user,
                &[Role::Teacher, Role::Learner],
                "create annotation sets",
            )?;
            check_write(&user, &set)?;
        }
        Err(e) => return Err(e.into()),
    }
    for (i, entry) in body.entries.iter().enumerate() {
        if entry.actor != user.id {
            return Err(ApiError::validation(
                "entry actor must be the caller",
                format!("entries[{i}].actor"),
            ));
        }
    }
    state
        .store
        .put_set(set, body.expected_revision, body.entries)
        .map_err(|e| set_write_error(e, "set."))?;
    document(&state, &sid)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationInput {
    #[serde(default)]
    id: Option<AnnotationId>,
    fragment: TimeFragment,
    body: Body,
    #[serde(default)]
    tags: Vec<String>,
    #[serde(default)]
    expected_revision: Option<u64>,
}

#[derive(Serialize)]
struct AnnotationChange {
    revision: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    annotation: Option<Annotation>,
}

#[derive(Deserialize)]
pub struct RevisionQuery {
    #[serde(default)]
    expected_revision: Option<u64>,
}

/// Applies one synthesized entry on top of the current set.
fn apply_one(
    state: &AppState,
    user: &User,
    sid: &SetId,
    expected: Option<u64>,
    change: impl FnOnce(&AnnotationSet, Timestamp) -> Result<EntryDraft, ApiError>,
) -> Result<(u64, Option<Annotation>), ApiError> {
    let current = state.store.get_set(sid)?;
    check_write(user, &current)?;
    let expected = expected.unwrap_or(current.revision);
    if expected != current.revision {
        return Err(ApiError::new(
            ErrorCode::RevisionConflict,
            format!(
                "revision conflict: expected {expected}, stored {}",
                current.revision
            ),
        ));
    }
    let entry = change(&current, Timestamp::now())?;
    let after = entry.after.clone();
    let mut annotations: Vec<Annotation> = current
        .annotations
        .iter()
        .filter(|a| a.id != entry.annotation_id)
        .cloned()
        .collect();
    annotations.extend(after.clone());
    let next = AnnotationSet {
        annotations,
        ..current
    };
    let revision = state
        .store
        .put_set(next, expected, vec![entry])
        .map_err(|e| match e {
            StoreError::Validation(ref v) => ApiError::from_violations(v, ""),
            StoreError::Entries(RevisionError::DuplicateId(_)) => {
                ApiError::validation(e.to_string(), "id")
            }
            other => other.into(),
        })?;
    Ok((revision, after))
}

fn next_annotation_id(set: &AnnotationSet) -> AnnotationId {
    (set.annotations.len() + 1..)
        .map(|n| AnnotationId::new(format!("a{n}")))
        .find(|id| set.get(id).is_none())
        .expect("unbounded search")
}

pub async fn add_annotation(
    State(state): State<AppState>,
    Caller(user): Caller,
    Path(sid): Path<SetId>,
    JsonBody(input): JsonBody<AnnotationInput>,
) -> Result<Response, ApiError> {
    let (revision, annotation) =
        apply_one(&state, &user, &sid, input.expected_revision, |set, now| {
            let id = match input.id {
                Some(id) if set.get(&id).is_some() => {
                    return Err(ApiError::new(
                        ErrorCode::Duplicate,
                        format!("annotation {id} already exists"),
                    )
                    .with_path("id"))
                }
                Some(id) => id,
                None => next_annotation_id(set),
            };
            let annotation = Annotation {
                id,
                author: user.id.clone(),
                created: now,
                modified: now,
                fragment: input.fragment,
                body: input.body,
                tags: normalize_tags(&input.tags),
            };
            Ok(EntryDraft::add(user.id.clone(), now, annotation))
        })?;
    let location = format!("/api/sets/{sid}");
    Ok(created(
        &location,
        &AnnotationChange {
            revision,
            annotation,
        },
    ))
}

pub async fn update_annotation(
    State(state): State<AppState>,
    Caller(user): Caller,
    Path((sid, aid)): Path<(SetId, AnnotationId)>,
    JsonBody(input): JsonBody<AnnotationInput>,
) -> Result<Response, ApiError> {
    if input.id.as_ref().is_some_and(|id| *id != aid) {
        return Err(ApiError::validation(
            "annotation id does not match the URL",
            "id",
        ));
    }
    let (revision, annotation) =
        apply_one(&state, &user, &sid, input.expected_revision, |set, now| {
            let before = set
                .get(&aid)
                .cloned()
                .ok_or_else(|| ApiError::not_found(format!("annotation {aid} not found")))?;
            let after = Annotation {
                modified: now.max(before.created),
                fragment: input.fragment,
                body: input.body,
                tags: normalize_tags(&input.tags),
                ..before.clone()
            };
            Ok(EntryDraft::update(user.id.clone(), now, before, after))
        })?;
    Ok(ok(&AnnotationChange {
        revision,
        annotation,
    }))
}

pub async fn remove_annotation(
    State(state): State<AppState>,
    Caller(user): Caller,
    Path((sid, aid)): Path<(SetId, AnnotationId)>,
    Query(q): Query<RevisionQuery>,
) -> Result<Response, ApiError> {
    let (revision, _) = apply_one(&state, &user, &sid, q.expected_revision, |set, now| {
        let before = set
            .get(&aid)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("annotation {aid} not found")))?;
        Ok(EntryDraft::remove(user.id.clone(), now, before))
    })?;
    Ok(ok(&AnnotationChange {
        revision,
        annotation: None,
    }))
}

pub async fn history(
    State(state): State<AppState>,
    MaybeCaller(user): MaybeCaller,
    Path(sid): Path<SetId>,
) -> Result<Response, ApiError> {
    readable(&state, user.as_ref(), &sid)?;
    let log = state.store.get_log(&sid)?;
    Ok(bytes_response(StatusCode::OK, JSON, export_log_json(&log)?))
}

pub async fn history_at(
    State(state): State<AppState>,
    MaybeCaller(user): MaybeCaller,
    Path((sid, n)): Path<(SetId, u64)>,
) -> Result<Response, ApiError> {
    let set = readable(&state, user.as_ref(), &sid)?;
    let stored = state.store.get_stored(&sid)?;
    let annotations = stored
        .log
        .replay(n)
        .map_err(|_| ApiError::not_found(format!("set {sid} has no revision {n}")))?;
    let video = state.store.get_video(&set.video_id)?;
    let provenance = if n == set.revision {
        set.provenance.clone()
    } else {
        None
    };
    let at = AnnotationSet {
        annotations,
        revision: n,
        provenance,
        ..set
    };
    Ok(bytes_response(
        StatusCode::OK,
        JSON,
        export_set_json(&at, &video)?,
    ))
}

#[derive(Deserialize)]
pub struct ExportQuery {
    #[serde(default)]
    format: Option<String>,
    #[serde(default)]
    point_padding_ms: Option<Millis>,
}

pub async fn export(
    State(state): State<AppState>,
    MaybeCaller(user): MaybeCaller,
    Path(sid): Path<SetId>,
    Query(q): Query<ExportQuery>,
) -> Result<Response, ApiError> {
    let set = readable(&state, user.as_ref(), &sid)?;
    let video = state.store.get_video(&set.video_id)?;
    match q.format.as_deref().unwrap_or("json") {
        "json" => Ok(bytes_response(
            StatusCode::OK,
            JSON,
            export_set_json(&set, &video)?,
        )),
        "webvtt" | "vtt" => {
            let padding = q.point_padding_ms.unwrap_or(DEFAULT_POINT_PADDING_MS);
            if padding <= 0 {
                return Err(ApiError::validation(
                    "point_padding_ms must be positive",
                    "point_padding_ms",
                ));
            }
            Ok(bytes_response(
                StatusCode::OK,
                "text/vtt",
                export_webvtt(&set, &video, padding)?,
            ))
        }
        "csv" => Ok(bytes_response(
            StatusCode::OK,
            "text/csv",
            export_csv(&set, &video)?,
        )),
        other => Err(ApiError::validation(
            format!("unknown export format {other:?}"),
            "format",
        )),
    }
}
