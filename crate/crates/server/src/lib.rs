//! HTTP/JSON API over the annotation store.
//!
//! Every response body is canonical JSON (or the requested export format).
//! Errors are [`ApiError`] documents.

mod auth;
mod catalog;
mod collab;
mod error;
mod respond;
mod sets;

pub use error::{ApiError, ErrorCode};

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::DefaultBodyLimit;
use axum::response::Response;
use axum::routing::{get, post, put};
use axum::Router;
use hyvid_store::{Store, StoreError};
use tower_http::services::{ServeDir, ServeFile};

pub const DEFAULT_PORT: u16 = 8675;
pub const MAX_BODY_BYTES: usize = 10 * 1024 * 1024;

#[derive(Clone, Debug)]
pub struct ServerConfig {
    pub port: u16,
    pub data_dir: PathBuf,
    pub private_sets: bool,
    /// Built web client, served at `/` when the directory exists.
    pub static_dir: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            port: DEFAULT_PORT,
            data_dir: PathBuf::from("data"),
            private_sets: false,
            static_dir: None,
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub private_sets: bool,
}

impl AppState {
    pub fn new(store: Arc<Store>, private_sets: bool) -> Self {
        Self {
            store,
            private_sets,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cannot listen on port {port}: {source}")]
    Bind {
        port: u16,
        #[source]
        source: std::io::Error,
    },
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/me", get(catalog::me))
        .route(
            "/videos",
            get(catalog::list_videos).post(catalog::create_video),
        )
        .route("/videos/{vid}", get(catalog::get_video))
        .route(
            "/videos/{vid}/resources",
            get(catalog::list_resources).post(catalog::create_resource),
        )
        .route(
            "/videos/{vid}/sets",
            get(sets::list_sets).post(sets::create_set),
        )
        .route("/videos/{vid}/merge", post(collab::merge_sets))
        .route("/sets/{sid}", get(sets::get_set).put(sets::put_set))
        .route("/sets/{sid}/annotations", post(sets::add_annotation))
        .route(
            "/sets/{sid}/annotations/{aid}",
            put(sets::update_annotation).delete(sets::remove_annotation),
        )
        .route("/sets/{sid}/history", get(sets::history))
        .route("/sets/{sid}/history/{n}", get(sets::history_at))
        .route("/sets/{sid}/export", get(sets::export))
        .route("/diff", post(collab::diff))
        .route("/grade", post(collab::grade))
        .fallback(api_not_found);

    let app = Router::new().nest("/api", api);
    let app = match static_dir.filter(|d| d.is_dir()) {
        Some(dir) => {
            let index = dir.join("index.html");
            app.fallback_service(ServeDir::new(dir).fallback(ServeFile::new(index)))
        }
        None => app.fallback(api_not_found),
    };
    app.layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(state)
}

async fn api_not_found() -> Response {
    axum::response::IntoResponse::into_response(ApiError::not_found("no such endpoint"))
}

/// Opens the store and binds the listener. Separate from [`run`] so callers
/// learn the bound address (port 0 picks a free port).
pub async fn bind(
    config: &ServerConfig,
) -> Result<(tokio::net::TcpListener, AppState), ServeError> {
    let store = Store::open(&config.data_dir)?;
    if store.is_read_only() {
        for c in store.corruption() {
            tracing::warn!(set = %c.set_id, reason = %c.reason, "store opened read-only");
        }
    }
    let state = AppState::new(Arc::new(store), config.private_sets);
    let addr = SocketAddr::from(([0, 0, 0, 0], config.port));
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServeError::Bind {
            port: config.port,
            source,
        })?;
    Ok((listener, state))
}

pub async fn run(
    listener: tokio::net::TcpListener,
    state: AppState,
    static_dir: Option<PathBuf>,
) -> Result<(), ServeError> {
    let app = router(state, static_dir);
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(shutdown())
        .await?;
    Ok(())
}

pub async fn serve(config: ServerConfig) -> Result<(), ServeError> {
    let (listener, state) = bind(&config).await?;
    run(listener, state, config.static_dir).await
}

async fn shutdown() {
    let _ = tokio::signal::ctrl_c().await;
}
