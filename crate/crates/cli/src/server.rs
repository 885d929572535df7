//! HTTP service: timeline API, health check and the UI's static files.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use evobase_core::config::Settings;
use evobase_core::ingest::{cache_key, FetchError, TimelineCache};
use evobase_core::pipeline::{ModelSet, Timeline};
use serde_json::json;
use tower_http::services::ServeDir;
use tower_http::trace::TraceLayer;

use crate::engine::{Engine, Source, TimelineSource};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub model_dir: PathBuf,
    pub settings: Settings,
    pub static_dir: Option<PathBuf>,
    pub timeout: Duration,
}

#[derive(Clone)]
pub struct AppState {
    source: Arc<dyn TimelineSource>,
    cache: Arc<TimelineCache>,
    timeout: Duration,
    computes: Arc<AtomicU64>,
}

impl AppState {
    pub fn new(source: Arc<dyn TimelineSource>, cache: Arc<TimelineCache>, timeout: Duration) -> Self {
        Self {
            source,
            cache,
            timeout,
            computes: Arc::new(AtomicU64::new(0)),
        }
    }

    /// Number of timelines computed (cache misses) so far.
    pub fn computes(&self) -> u64 {
        self.computes.load(Ordering::SeqCst)
    }

    pub fn cache(&self) -> &TimelineCache {
        &self.cache
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl From<FetchError> for ApiError {
    fn from(err: FetchError) -> Self {
        let status = match &err {
            FetchError::NotFound(_) => StatusCode::NOT_FOUND,
            e if e.is_upstream() => StatusCode::BAD_GATEWAY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, err.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/timeline", get(timeline))
        .with_state(state);
    let app = match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    app.layer(TraceLayer::new_for_http())
}

async fn health(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "model_version": state.source.model_version() }))
}

fn parse_source(params: &HashMap<String, String>) -> Result<Source, ApiError> {
    let pick = |k: &str| params.get(k).map(|v| v.trim()).filter(|v| !v.is_empty());
    match (pick("query"), pick("url")) {
        (Some(q), None) => Ok(Source::Query(q.to_string())),
        (None, Some(u)) if u.starts_with("http://") || u.starts_with("https://") => Ok(Source::Url(u.to_string())),
        (None, Some(_)) => Err(ApiError::new(StatusCode::BAD_REQUEST, "url must start with http:// or https://")),
        (Some(_), Some(_)) => Err(ApiError::new(StatusCode::BAD_REQUEST, "give either query or url, not both")),
        (None, None) => Err(ApiError::new(StatusCode::BAD_REQUEST, "missing query or url parameter")),
    }
}

async fn timeline(
    State(state): State<AppState>,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Json<Timeline>, ApiError> {
    let source = parse_source(&params)?;
    let version = state.source.model_version().to_string();
    let key = match &source {
        Source::Url(u) => format!("url:{u}|{version}"),
        other => cache_key(&other.label(), &version),
    };
    let work = {
        let state = state.clone();
        tokio::task::spawn_blocking(move || {
            state.cache.get_or_compute(&key, || {
                state.computes.fetch_add(1, Ordering::SeqCst);
                state.source.timeline(&source)
            })
        })
    };
    match tokio::time::timeout(state.timeout, work).await {
        Err(_) => Err(ApiError::new(StatusCode::GATEWAY_TIMEOUT, "timeline computation timed out")),
        Ok(Err(join)) => {
            tracing::error!(error = %join, "timeline task failed");
            Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal error"))
        }
        Ok(Ok(result)) => Ok(Json(result?)),
    }
}

/// Loads the models, then serves until interrupted.
pub async fn serve(config: ServiceConfig) -> anyhow::Result<()> {
    let models = ModelSet::load_dir(&config.model_dir)
        .with_context(|| format!("loading models from {}", config.model_dir.display()))?;
    let engine = Engine::new(models, &config.settings).context("loading word lists")?;
    tracing::info!(model_version = engine.model_version(), "models loaded");
    let cache = TimelineCache::new(config.settings.cache_dir.clone(), config.settings.cache_ttl_secs);
    let state = AppState::new(Arc::new(engine), Arc::new(cache), config.timeout);
    let app = router(state, config.static_dir.clone());
    let listener = tokio::net::TcpListener::bind(config.listen)
        .await
        .with_context(|| format!("binding {}", config.listen))?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
