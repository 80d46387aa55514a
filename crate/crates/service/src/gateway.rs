//! Path-prefix reverse proxy with round-robin over each service's replicas.
//! Response bodies pass through unchanged.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::extract::{Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use resa_client::{PAYMENT_TEST_HEADER, REQUEST_ID_HEADER};

use crate::app::{AppState, Peers};
use crate::config::Role;
use crate::error::ApiError;

const MAX_BODY: usize = 16 << 20;
const FORWARDED: [&str; 3] = ["content-type", REQUEST_ID_HEADER, PAYMENT_TEST_HEADER];

pub struct Gateway {
    http: reqwest::Client,
    routes: BTreeMap<Role, (Vec<String>, AtomicUsize)>,
}

impl Gateway {
    pub fn new(peers: &Peers, timeout: Duration) -> Self {
        let http = reqwest::Client::builder()
            .timeout(timeout)
            .pool_max_idle_per_host(1024)
            .tcp_nodelay(true)
            .build()
            .expect("static client config");
        let routes = peers
            .urls
            .iter()
            .filter(|(r, v)| !v.is_empty() && **r != Role::Gateway)
            .map(|(r, v)| (*r, (v.clone(), AtomicUsize::new(0))))
            .collect();
        Gateway { http, routes }
    }

    /// Next replica for `role`, in strict rotation.
    pub fn pick(&self, role: Role) -> Option<&str> {
        let (urls, next) = self.routes.get(&role)?;
        let i = next.fetch_add(1, Ordering::Relaxed) % urls.len();
        Some(&urls[i])
    }
}

pub async fn proxy(State(st): State<Arc<AppState>>, req: Request) -> Response {
    match forward(st.gateway(), req).await {
        Ok(r) => r,
        Err(e) => e.into_response(),
    }
}

async fn forward(gw: &Gateway, req: Request) -> Result<Response, ApiError> {
    let path = req.uri().path().to_owned();
    let role = Role::for_path(&path).ok_or_else(|| ApiError::not_found("no such endpoint"))?;
    let base = gw
        .pick(role)
        .ok_or_else(|| ApiError::new(StatusCode::BAD_GATEWAY, format!("no {role} replica")))?;
    let target = match req.uri().query() {
        Some(q) => format!("{base}{path}?{q}"),
        None => format!("{base}{path}"),
    };
    let method = req.method().clone();
    let mut out = gw.http.request(method, target);
    for h in FORWARDED {
        if let Some(v) = req.headers().get(h) {
            out = out.header(h, v.as_bytes());
        }
    }
    let body = axum::body::to_bytes(req.into_body(), MAX_BODY)
        .await
        .map_err(|e| ApiError::bad_request(format!("unreadable body: {e}")))?;
    if !body.is_empty() {
        out = out.body(body);
    }
    let resp = out.send().await.map_err(downstream_error)?;
    let status = StatusCode::from_u16(resp.status().as_u16()).unwrap_or(StatusCode::BAD_GATEWAY);
    let ctype = resp.headers().get("content-type").map(|v| v.as_bytes().to_vec());
    let bytes = resp.bytes().await.map_err(downstream_error)?;
    let mut r = Response::new(Body::from(bytes));
    *r.status_mut() = status;
    if let Some(c) = ctype.and_then(|c| HeaderValue::from_bytes(&c).ok()) {
        r.headers_mut().insert(header::CONTENT_TYPE, c);
    }
    Ok(r)
}

fn downstream_error(e: reqwest::Error) -> ApiError {
    if e.is_timeout() {
        ApiError::new(StatusCode::GATEWAY_TIMEOUT, "downstream timeout")
    } else {
        ApiError::new(StatusCode::BAD_GATEWAY, format!("downstream unavailable: {e}"))
    }
}
