mod support;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use chrono::DateTime;
use evobase_cli::{router, AppState, Engine, Source, TimelineSource};
use evobase_core::config::Settings;
use evobase_core::ingest::{FetchError, TimelineCache};
use evobase_core::pipeline::Timeline;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

fn engine(endpoint: &str) -> Engine {
    let settings = Settings {
        endpoint: endpoint.to_string(),
        fetch_timeout_secs: 5,
        ..Settings::default()
    };
    Engine::new(support::fixture_models().clone(), &settings).unwrap()
}

fn app_with(source: Arc<dyn TimelineSource>, timeout: Duration) -> (Router, AppState) {
    let state = AppState::new(source, Arc::new(TimelineCache::new(None, 3600)), timeout);
    (router(state.clone(), None), state)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    let response = app
        .clone()
        .oneshot(Request::builder().uri(uri).body(Body::empty()).unwrap())
        .await
        .unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    let body = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, body)
}

#[tokio::test]
async fn health_reports_model_version() {
    let (app, _) = app_with(Arc::new(engine("http://127.0.0.1:1/w/api.php")), Duration::from_secs(5));
    let (status, body) = get(&app, "/api/health").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    assert_eq!(body["model_version"], support::fixture_models().version());
}

#[tokio::test]
async fn query_timeline_from_recorded_endpoint() {
    let server = support::fake_http::start();
    let (app, _) = app_with(Arc::new(engine(&server.api())), Duration::from_secs(30));
    let (status, body) = get(&app, "/api/timeline?query=Saint%20Petersburg").await;
    assert_eq!(status, StatusCode::OK);
    let t: Timeline = serde_json::from_value(body).unwrap();
    assert_eq!(t.query, "Saint Petersburg");
    assert!(t.entries.iter().any(|e| e.year == 1914 && e.text.contains("Petrograd")));
    assert!(t.entries.windows(2).all(|w| w[0].year <= w[1].year));
}

#[tokio::test]
async fn url_timeline() {
    let server = support::fake_http::start();
    let (app, _) = app_with(Arc::new(engine(&server.api())), Duration::from_secs(30));
    let uri = format!("/api/timeline?url={}/saint_petersburg.txt", server.base);
    let (status, body) = get(&app, &uri).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert!(body["entries"].as_array().unwrap().iter().any(|e| e["year"] == 1914));
}

#[tokio::test]
async fn parameter_errors_are_400() {
    let (app, _) = app_with(Arc::new(engine("http://127.0.0.1:1/w/api.php")), Duration::from_secs(5));
    for uri in [
        "/api/timeline?query=Oslo&url=http://example.org",
        "/api/timeline",
        "/api/timeline?query=%20%20",
        "/api/timeline?url=ftp://example.org/x",
    ] {
        let (status, body) = get(&app, uri).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{uri}");
        assert!(body["error"].is_string());
    }
}

#[tokio::test]
async fn unknown_article_is_404_and_upstream_failure_is_502() {
    let server = support::fake_http::start();
    let (app, _) = app_with(Arc::new(engine(&server.api())), Duration::from_secs(30));
    assert_eq!(get(&app, "/api/timeline?query=Atlantis%20City").await.0, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, "/api/timeline?query=Broken%20Upstream").await.0, StatusCode::BAD_GATEWAY);
    assert_eq!(get(&app, "/api/timeline?query=Rate%20Limited").await.0, StatusCode::BAD_GATEWAY);
    let (app, _) = app_with(Arc::new(engine("http://127.0.0.1:1/w/api.php")), Duration::from_secs(30));
    assert_eq!(get(&app, "/api/timeline?query=Oslo").await.0, StatusCode::BAD_GATEWAY);
}

struct Scripted {
    delay: Duration,
    calls: AtomicUsize,
}

impl TimelineSource for Scripted {
    fn model_version(&self) -> &str {
        "test"
    }

    fn timeline(&self, source: &Source) -> Result<Timeline, FetchError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        std::thread::sleep(self.delay);
        Ok(Timeline {
            query: source.label(),
            model_version: "test".into(),
            generated_at: DateTime::from_timestamp(0, 0).unwrap(),
            entries: Vec::new(),
        })
    }
}

#[tokio::test]
async fn slow_computation_is_504() {
    let source = Arc::new(Scripted {
        delay: Duration::from_millis(500),
        calls: AtomicUsize::new(0),
    });
    let (app, _) = app_with(source, Duration::from_millis(50));
    assert_eq!(get(&app, "/api/timeline?query=Oslo").await.0, StatusCode::GATEWAY_TIMEOUT);
}

#[tokio::test]
async fn no_evolutions_is_200_with_empty_entries() {
    let source = Arc::new(Scripted {
        delay: Duration::ZERO,
        calls: AtomicUsize::new(0),
    });
    let (app, _) = app_with(source, Duration::from_secs(5));
    let (status, body) = get(&app, "/api/timeline?query=Vienna").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["entries"], Value::Array(Vec::new()));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_identical_requests_compute_once() {
    let source = Arc::new(Scripted {
        delay: Duration::from_millis(200),
        calls: AtomicUsize::new(0),
    });
    let (app, state) = app_with(source.clone(), Duration::from_secs(5));
    let requests = (0..6).map(|_| {
        let app = app.clone();
        tokio::spawn(async move { get(&app, "/api/timeline?query=Saint%20Petersburg").await })
    });
    let mut bodies = Vec::new();
    for r in requests {
        let (status, body) = r.await.unwrap();
        assert_eq!(status, StatusCode::OK);
        bodies.push(body);
    }
    assert!(bodies.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(state.computes(), 1);
    assert_eq!(source.calls.load(Ordering::SeqCst), 1);
}

#[tokio::test]
async fn query_normalization_shares_cache_entry() {
    let source = Arc::new(Scripted {
        delay: Duration::ZERO,
        calls: AtomicUsize::new(0),
    });
    let (app, state) = app_with(source, Duration::from_secs(5));
    get(&app, "/api/timeline?query=Saint%20Petersburg").await;
    get(&app, "/api/timeline?query=%20saint%20%20petersburg").await;
    assert_eq!(state.computes(), 1);
    get(&app, "/api/timeline?query=Oslo").await;
    assert_eq!(state.computes(), 2);
}

#[tokio::test]
async fn static_files_served_at_root() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<h1>ui</h1>").unwrap();
    let state = AppState::new(
        Arc::new(engine("http://127.0.0.1:1/w/api.php")),
        Arc::new(TimelineCache::new(None, 60)),
        Duration::from_secs(5),
    );
    let app = router(state, Some(dir.path().to_path_buf()));
    let response = app
        .clone()
        .oneshot(Request::builder().uri("/").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(response.status(), StatusCode::OK);
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    assert_eq!(&bytes[..], b"<h1>ui</h1>");
    assert_eq!(get(&app, "/api/health").await.0, StatusCode::OK);
}
