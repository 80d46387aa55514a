//! Stand-in server with a fixed service time and an optional admission
//! limit, used to check the load generator against known answers.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Request, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use resa_client::REQUEST_ID_HEADER;

#[derive(Debug, Clone, Default)]
pub struct StubConfig {
    pub latency: Duration,
    /// Requests beyond this many in flight get 503.
    pub admission_limit: Option<usize>,
    /// Keep every request for later inspection.
    pub record: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Recorded {
    pub request_id: String,
    pub method: String,
    pub path: String,
    pub body: Vec<u8>,
}

struct StubState {
    cfg: StubConfig,
    in_flight: AtomicUsize,
    log: Mutex<Vec<Recorded>>,
}

pub struct Stub {
    pub url: String,
    state: Arc<StubState>,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
}

impl Stub {
    pub async fn start(cfg: StubConfig) -> std::io::Result<Stub> {
        let state = Arc::new(StubState {
            cfg,
            in_flight: AtomicUsize::new(0),
            log: Mutex::new(Vec::new()),
        });
        let app = Router::new()
            .route("/health", get(health))
            .route("/metrics", get(metrics))
            .fallback(handle)
            .with_state(state.clone());
        let l = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
        let url = format!("http://{}", l.local_addr()?);
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        tokio::spawn(async move {
            let _ = axum::serve(l, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await;
        });
        Ok(Stub {
            url,
            state,
            stop: Some(tx),
        })
    }

    pub fn recorded(&self) -> Vec<Recorded> {
        self.state.log.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

impl Drop for Stub {
    fn drop(&mut self) {
        if let Some(s) = self.stop.take() {
            let _ = s.send(());
        }
    }
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({"status": "ok", "role": "stub", "pid": std::process::id()}))
}

async fn metrics() -> Json<serde_json::Value> {
    Json(serde_json::json!({"mode": "stub", "processes": []}))
}

async fn handle(State(st): State<Arc<StubState>>, req: Request) -> Response {
    let n = st.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    let _guard = Leave(&st.in_flight);
    if st.cfg.admission_limit.is_some_and(|c| n > c) {
        return (StatusCode::SERVICE_UNAVAILABLE, r#"{"error":"overloaded"}"#).into_response();
    }
    if st.cfg.record {
        let request_id = req
            .headers()
            .get(REQUEST_ID_HEADER)
            .and_then(|v| v.to_str().ok())
            .unwrap_or_default()
            .to_owned();
        let method = req.method().to_string();
        let path = req.uri().to_string();
        let body: Bytes = axum::body::to_bytes(req.into_body(), 1 << 20).await.unwrap_or_default();
        st.log.lock().unwrap_or_else(|e| e.into_inner()).push(Recorded {
            request_id,
            method,
            path,
            body: body.to_vec(),
        });
    }
    if !st.cfg.latency.is_zero() {
        tokio::time::sleep(st.cfg.latency).await;
    }
    (StatusCode::OK, "{}").into_response()
}

struct Leave<'a>(&'a AtomicUsize);

impl Drop for Leave<'_> {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}
