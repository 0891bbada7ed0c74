use axum::extract::{Path, State};
use axum::response::Response;
use hyvid_core::model::{Resource, VideoId, VideoReference};
use hyvid_store::{Role, User};
use serde::Serialize;

use crate::auth::{require_role, Caller, MaybeCaller};
use crate::error::ApiError;
use crate::respond::{created, ok, JsonBody};
use crate::AppState;

#[derive(Serialize)]
struct Me<'a> {
    id: &'a str,
    display_name: &'a str,
    role: &'a str,
}

pub async fn me(Caller(user): Caller) -> Response {
    let User {
        id,
        display_name,
        role,
        ..
    } = &user;
    ok(&Me {
        id: id.as_str(),
        display_name,
        role: role.as_str(),
    })
}

pub async fn list_videos(State(state): State<AppState>, _: MaybeCaller) -> Response {
    ok(&state.store.list_videos())
}

pub async fn get_video(
    State(state): State<AppState>,
    _: MaybeCaller,
    Path(vid): Path<VideoId>,
) -> Result<Response, ApiError> {
    Ok(ok(&state.store.get_video(&vid)?))
}

pub async fn create_video(
    State(state): State<AppState>,
    Caller(user): Caller,
    JsonBody(video): JsonBody<VideoReference>,
) -> Result<Response, ApiError> {
    require_role(&user, &[Role::Teacher], "create videos")?;
    let video = state.store.put_video(video)?;
    Ok(created(&format!("/api/videos/{}", video.id), &video))
}

pub async fn list_resources(
    State(state): State<AppState>,
    _: MaybeCaller,
    Path(vid): Path<VideoId>,
) -> Result<Response, ApiError> {
    Ok(ok(&state.store.list_resources(&vid)?))
}

pub async fn create_resource(
    State(state): State<AppState>,
    Caller(user): Caller,
    Path(vid): Path<VideoId>,
    JsonBody(resource): JsonBody<Resource>,
) -> Result<Response, ApiError> {
    require_role(&user, &[Role::Teacher], "add resources")?;
    let resource = state.store.put_resource(&vid, resource)?;
    Ok(created(&format!("/api/videos/{vid}/resources"), &resource))
}
