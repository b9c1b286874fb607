//! JSON HTTP service over a course store and chat engine.
//!
//! Instructor routes (course creation, document upload and removal) need
//! `Authorization: Bearer <CHATED_INSTRUCTOR_TOKEN>`; session routes are open.

mod config;
mod error;
mod routes;
mod target;

pub use config::{ConfigError, EmbedSettings, ServerConfig, DEFAULT_PORT};
pub use error::ApiError;
pub use target::{HttpChatTarget, RemoteApiError};

use std::future::Future;
use std::sync::Arc;

use axum::extract::DefaultBodyLimit;
use axum::http::{header, HeaderValue, Method};
use axum::routing::{delete, get, post};
use axum::Router;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

use chated_core::chat::ChatEngine;
use chated_core::embed::{Embedder, HashingEmbedder, RemoteEmbedder, RemoteEmbedderConfig, DEFAULT_DIMS};
use chated_core::ingest::{AcquireOptions, MAX_SOURCE_BYTES};
use chated_core::llm::{build_provider, ChatProvider, LlmError};
use chated_core::store::{Store, StoreError};

/// Multipart framing allowance on top of the document size cap.
const BODY_SLACK: usize = 1024 * 1024;

#[derive(Clone)]
pub struct AppState {
    pub engine: Arc<ChatEngine>,
    pub instructor_token: Option<String>,
    pub acquire: AcquireOptions,
}

impl AppState {
    pub fn new(engine: Arc<ChatEngine>, instructor_token: Option<String>) -> Self {
        AppState {
            engine,
            instructor_token,
            acquire: AcquireOptions::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Provider(#[from] LlmError),
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

pub fn build_embedder(cfg: &ServerConfig) -> Arc<dyn Embedder> {
    match &cfg.embed {
        None => Arc::new(HashingEmbedder::new(DEFAULT_DIMS)),
        Some(e) => {
            let mut rc = RemoteEmbedderConfig::new(e.endpoint.clone(), e.dims);
            rc.credential_env = e.credential_env.clone();
            Arc::new(RemoteEmbedder::new(rc))
        }
    }
}

/// Opens the store and provider described by `cfg`.
pub fn build_state(cfg: &ServerConfig) -> Result<AppState, ServeError> {
    let store = Arc::new(Store::open(&cfg.data_dir, build_embedder(cfg))?);
    let provider: Arc<dyn ChatProvider> = build_provider(&cfg.provider)?;
    let engine = Arc::new(ChatEngine::new(store, provider));
    Ok(AppState::new(engine, cfg.instructor_token.clone()))
}

fn cors(origin: Option<&str>) -> CorsLayer {
    let allow = match origin.and_then(|o| HeaderValue::from_str(o).ok()) {
        Some(o) => AllowOrigin::exact(o),
        None => AllowOrigin::from(Any),
    };
    CorsLayer::new()
        .allow_origin(allow)
        .allow_methods([Method::GET, Method::POST, Method::DELETE])
        .allow_headers([header::AUTHORIZATION, header::CONTENT_TYPE])
}

pub fn router(state: AppState, cors_origin: Option<&str>) -> Router {
    let body_limit = state.acquire.max_bytes.min(MAX_SOURCE_BYTES) as usize + BODY_SLACK;
    Router::new()
        .route("/healthz", get(routes::health))
        .route("/courses", post(routes::create_course).get(routes::list_courses))
        .route(
            "/courses/:course_id/documents",
            post(routes::add_document).get(routes::list_documents),
        )
        .route(
            "/courses/:course_id/documents/:doc_id",
            delete(routes::remove_document),
        )
        .route("/courses/:course_id/sessions", post(routes::create_session))
        .route(
            "/sessions/:session_id/messages",
            post(routes::post_message).get(routes::transcript),
        )
        .fallback(routes::not_found)
        .layer(DefaultBodyLimit::max(body_limit))
        .layer(cors(cors_origin))
        .with_state(state)
}

/// Serves on an already bound listener until `shutdown` resolves.
pub async fn serve_on(
    listener: tokio::net::TcpListener,
    app: Router,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServeError> {
    axum::serve(listener, app)
        .with_graceful_shutdown(shutdown)
        .await?;
    Ok(())
}

/// Runs the service described by `cfg` until Ctrl-C.
pub async fn serve(cfg: ServerConfig) -> Result<(), ServeError> {
    let state = tokio::task::block_in_place(|| build_state(&cfg))?;
    if state.instructor_token.is_none() {
        tracing::warn!("CHATED_INSTRUCTOR_TOKEN is not set; instructor routes will answer 401");
    }
    let listener = tokio::net::TcpListener::bind(cfg.bind)
        .await
        .map_err(|source| ServeError::Bind {
            addr: cfg.bind.to_string(),
            source,
        })?;
    tracing::info!(addr = %cfg.bind, data_dir = %cfg.data_dir.display(), "listening");
    let app = router(state, cfg.cors_origin.as_deref());
    serve_on(listener, app, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}
