use axum::body::{Body, Bytes};
use axum::extract::{FromRequest, Request};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use hyvid_core::canonical;
use hyvid_core::interchange::ENVELOPE_LEADING_KEYS;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{ApiError, ErrorCode};

pub const JSON: &str = "application/json";

/// Canonical JSON response. Envelope documents keep `format`/`version`
/// first, exactly as the interchange export writes them.
pub fn canonical<T: Serialize>(status: StatusCode, value: &T) -> Response {
    match canonical::to_vec_with_leading(value, ENVELOPE_LEADING_KEYS) {
        Ok(bytes) => bytes_response(status, JSON, bytes),
        Err(e) => {
            let body = format!(
                r#"{{"code":"internal","message":{:?},"status":500}}"#,
                e.to_string()
            );
            bytes_response(StatusCode::INTERNAL_SERVER_ERROR, JSON, body.into_bytes())
        }
    }
}

pub fn ok<T: Serialize>(value: &T) -> Response {
    canonical(StatusCode::OK, value)
}

pub fn created<T: Serialize>(location: &str, value: &T) -> Response {
    let mut resp = canonical(StatusCode::CREATED, value);
    if let Ok(v) = HeaderValue::from_str(location) {
        resp.headers_mut().insert(header::LOCATION, v);
    }
    resp
}

pub fn bytes_response(
    status: StatusCode,
    content_type: &'static str,
    bytes: impl Into<Body>,
) -> Response {
    (status, [(header::CONTENT_TYPE, content_type)], bytes.into()).into_response()
}

/// JSON request body parsed with field paths in error messages.
pub struct JsonBody<T>(pub T);

impl<S, T> FromRequest<S> for JsonBody<T>
where
    S: Send + Sync,
    T: DeserializeOwned,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        let is_json = req
            .headers()
            .get(header::CONTENT_TYPE)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.split(';').next())
            .is_some_and(|v| v.trim().eq_ignore_ascii_case(JSON));
        if !is_json {
            return Err(ApiError::new(
                ErrorCode::UnsupportedMediaType,
                "request body must be application/json",
            ));
        }
        let bytes = Bytes::from_request(req, state).await.map_err(|rejection| {
            if rejection.status() == StatusCode::PAYLOAD_TOO_LARGE {
                ApiError::new(ErrorCode::PayloadTooLarge, "request body exceeds 10 MiB")
            } else {
                ApiError::bad_request(rejection.body_text())
            }
        })?;
        parse(&bytes).map(JsonBody)
    }
}

pub fn parse<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_syntax() || inner.is_eof() {
            ApiError::bad_request(format!("malformed JSON: {inner}"))
        } else {
            ApiError::validation(inner.to_string(), path)
        }
    })
}
