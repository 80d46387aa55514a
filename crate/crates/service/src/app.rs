//! HTTP routers for every role. The monolith mounts all endpoint groups in
//! one process; each service process mounts only its own group. Handlers call
//! the same functions in both cases, so response bodies are identical.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::{Body, Bytes};
use axum::extract::{Path, RawQuery, Request, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use resa_client::{Client, PAYMENT_TEST_HEADER, REQUEST_ID_HEADER};
use resa_core::wire::{
    BookingRequest, EventsResponse, Health, HoldRef, HoldRequest, HoldResponse, OptimizeRequest,
    ProfileResponse, QuoteRequest, RecommendRequest,
};
use resa_core::OptionId;
use serde::{Deserialize, Serialize};

use crate::booking::{BookingConfig, BookingService, InventoryPort, CONFIRMED_TOPIC};
use crate::bus::Bus;
use crate::config::{DeploymentSpec, Mode, Role};
use crate::data::Scenario;
use crate::error::{parse_body, ApiError};
use crate::gateway::Gateway;
use crate::handlers::{self, RecommendConfig, SearchQuery};
use crate::inventory::{Clock, Inventory, InventoryError};
use crate::profile::{spawn_local_consumer, spawn_remote_consumer, ProfileStore};
use crate::runtime::{endpoint_key, Executor, Metrics};

/// Addresses of the other processes of a deployment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Peers {
    /// Base URLs per role, one per replica.
    pub urls: BTreeMap<Role, Vec<String>>,
    /// The other processes of the deployment, as (instance name, pid).
    pub processes: Vec<(String, u32)>,
}

impl Peers {
    pub fn first(&self, role: Role) -> Result<&str, String> {
        self.urls
            .get(&role)
            .and_then(|v| v.first())
            .map(String::as_str)
            .ok_or_else(|| format!("no {role} address given"))
    }
}

pub struct AppState {
    pub role: Role,
    pub spec: Arc<DeploymentSpec>,
    scenario: Option<Arc<Scenario>>,
    exec: Executor,
    pub metrics: Metrics,
    booking: Option<Arc<BookingService>>,
    inventory: Option<Arc<Inventory>>,
    profiles: Option<Arc<ProfileStore>>,
    bus: Option<Arc<Bus>>,
    gateway: Option<Gateway>,
    peers: Peers,
    next_request: AtomicU64,
    background: Vec<tokio::task::JoinHandle<()>>,
}

impl Drop for AppState {
    fn drop(&mut self) {
        for h in &self.background {
            h.abort();
        }
    }
}

fn serves(role: Role, group: Role) -> bool {
    role == Role::Monolith || role == group
}

impl AppState {
    /// Builds the state of one process. Must run inside a tokio runtime.
    pub async fn build(role: Role, spec: DeploymentSpec, scenario: Option<Arc<Scenario>>, peers: Peers) -> Result<Arc<Self>, String> {
        spec.validate()?;
        let need_scenario = role != Role::Gateway;
        if need_scenario && scenario.is_none() {
            return Err(format!("{role} needs a scenario"));
        }
        let coarse = role == Role::Monolith || (!spec.sharded_datastore && Role::STATEFUL.contains(&role));
        let exec = Executor::new(spec.worker_pool_size, spec.max_queue, coarse, spec.work.clone());
        let timeout = Duration::from_millis(spec.downstream_timeout_ms);
        let downstream = |url: &str| Client::with_http(resa_client::http_client(timeout), url, None);

        let mut inventory = None;
        let mut booking = None;
        let mut bus = None;
        let mut profiles = None;
        let mut background = Vec::new();
        if let Some(s) = &scenario {
            if serves(role, Role::Inventory) {
                inventory = Some(Arc::new(Inventory::from_catalog(&s.catalog, Clock::System)));
            }
            if serves(role, Role::Booking) {
                let b = Arc::new(Bus::new(spec.bus_queue_depth, Duration::from_millis(spec.bus_send_timeout_ms), true));
                let port = match &inventory {
                    Some(inv) => InventoryPort::Local(inv.clone()),
                    None => InventoryPort::Remote(downstream(peers.first(Role::Inventory)?)),
                };
                booking = Some(Arc::new(BookingService::new(
                    Arc::new(s.catalog.clone()),
                    port,
                    b.clone(),
                    BookingConfig {
                        hold_ttl_ms: spec.hold_ttl_ms,
                        payment_decline_threshold: spec.payment_decline_threshold,
                    },
                    Clock::System,
                )));
                bus = Some(b);
            }
            if serves(role, Role::Profile) {
                let store = Arc::new(ProfileStore::new());
                let h = match &bus {
                    Some(b) => spawn_local_consumer(b.subscribe(CONFIRMED_TOPIC).await, store.clone()),
                    None => spawn_remote_consumer(
                        downstream(peers.first(Role::Booking)?),
                        store.clone(),
                        Duration::from_millis(spec.event_poll_ms),
                    ),
                };
                background.push(h);
                profiles = Some(store);
            }
        }
        let gateway = (role == Role::Gateway).then(|| Gateway::new(&peers, timeout));
        Ok(Arc::new(AppState {
            role,
            spec: Arc::new(spec),
            scenario,
            exec,
            metrics: Metrics::default(),
            booking,
            inventory,
            profiles,
            bus,
            gateway,
            peers,
            next_request: AtomicU64::new(1),
            background,
        }))
    }

    fn scenario(&self) -> &Arc<Scenario> {
        self.scenario.as_ref().expect("checked at build")
    }

    fn mode(&self) -> Mode {
        self.spec.mode
    }
}

pub fn json_response<T: Serialize>(status: StatusCode, v: &T) -> Response {
    raw_json(status, serde_json::to_vec(v).expect("serializable"))
}

fn raw_json(status: StatusCode, body: impl Into<Body>) -> Response {
    let mut r = Response::new(body.into());
    *r.status_mut() = status;
    r.headers_mut()
        .insert(header::CONTENT_TYPE, HeaderValue::from_static("application/json"));
    r
}

fn ok<T: Serialize>(v: &T) -> Response {
    json_response(StatusCode::OK, v)
}

type Shared = State<Arc<AppState>>;

async fn health(State(st): Shared) -> Response {
    ok(&Health {
        status: "ok".into(),
        role: st.role.name().into(),
        pid: std::process::id(),
    })
}

async fn metrics(State(st): Shared) -> Response {
    let mut processes = st.peers.processes.clone();
    processes.push((st.role.name().into(), std::process::id()));
    ok(&serde_json::json!({
        "role": st.role.name(),
        "mode": st.mode().to_string(),
        "pid": std::process::id(),
        "uptime_s": st.metrics.uptime().as_secs_f64(),
        "processes": processes,
        "executor": st.exec.stats(),
        "endpoints": st.metrics.snapshot(),
    }))
}

async fn search(State(st): Shared, RawQuery(q): RawQuery) -> Result<Response, ApiError> {
    let q = SearchQuery::parse(q.as_deref().unwrap_or(""))?;
    st.exec
        .run(Role::Search, async { handlers::search(st.scenario(), &q).map(|r| ok(&r)) })
        .await
}

async fn quote(State(st): Shared, body: Bytes) -> Result<Response, ApiError> {
    let req: QuoteRequest = parse_body(&body)?;
    st.exec
        .run(Role::Quote, async { handlers::quote(st.scenario(), &req).map(|r| ok(&r)) })
        .await
}

async fn recommend(State(st): Shared, body: Bytes) -> Result<Response, ApiError> {
    let req: RecommendRequest = parse_body(&body)?;
    let cfg = RecommendConfig {
        lambda: st.spec.recommend_lambda,
        neighbors: st.spec.recommend_neighbors,
        content: st.spec.content_weights,
    };
    st.exec
        .run(Role::Recommend, async {
            handlers::recommend(st.scenario(), &req, &cfg, &st.spec.carbon).map(|r| ok(&r))
        })
        .await
}

async fn optimize(State(st): Shared, body: Bytes) -> Result<Response, ApiError> {
    let req: OptimizeRequest = parse_body(&body)?;
    let s = st.scenario().clone();
    let spec = st.spec.clone();
    st.exec
        .run(Role::Optimize, async move {
            tokio::task::spawn_blocking(move || handlers::optimize(&s, &req, &spec.ga, &spec.carbon).map(|r| ok(&r)))
                .await
                .map_err(|e| ApiError::internal(format!("optimizer task failed: {e}")))?
        })
        .await
}

fn booking_svc(st: &AppState) -> &BookingService {
    st.booking.as_deref().expect("mounted with booking routes")
}

fn saga_response((status, body): (StatusCode, String)) -> Response {
    raw_json(status, body)
}

fn declined(headers: &HeaderMap) -> bool {
    headers
        .get(PAYMENT_TEST_HEADER)
        .is_some_and(|v| v.as_bytes().eq_ignore_ascii_case(b"decline"))
}

async fn create_booking(State(st): Shared, headers: HeaderMap, body: Bytes) -> Result<Response, ApiError> {
    let req: BookingRequest = parse_body(&body)?;
    let force = declined(&headers);
    st.exec
        .run(Role::Booking, async { booking_svc(&st).create(&req, force).await.map(saga_response) })
        .await
}

async fn get_booking(State(st): Shared, Path(id): Path<String>) -> Result<Response, ApiError> {
    st.exec
        .run(Role::Booking, async { booking_svc(&st).get(&id).await.map(saga_response) })
        .await
}

async fn booking_step(State(st): Shared, Path((id, step)): Path<(String, String)>, headers: HeaderMap) -> Result<Response, ApiError> {
    let force = declined(&headers);
    st.exec
        .run(Role::Booking, async {
            let svc = booking_svc(&st);
            match step.as_str() {
                "pay" => svc.pay(&id, force).await,
                "confirm" => svc.confirm(&id).await,
                "cancel" => svc.cancel(&id).await,
                other => Err(ApiError::not_found(format!("unknown booking step {other}"))),
            }
            .map(saga_response)
        })
        .await
}

#[derive(Deserialize)]
struct EventsQuery {
    topic: String,
    #[serde(default)]
    after: u64,
    #[serde(default = "default_limit")]
    limit: usize,
}

fn default_limit() -> usize {
    500
}

async fn events(State(st): Shared, RawQuery(q): RawQuery) -> Result<Response, ApiError> {
    let mut parsed = EventsQuery {
        topic: String::new(),
        after: 0,
        limit: default_limit(),
    };
    for pair in q.as_deref().unwrap_or("").split('&').filter(|p| !p.is_empty()) {
        let (k, v) = pair.split_once('=').unwrap_or((pair, ""));
        let bad = |_| ApiError::bad_request(format!("malformed {k}"));
        match k {
            "topic" => parsed.topic = v.to_owned(),
            "after" => parsed.after = v.parse().map_err(bad)?,
            "limit" => parsed.limit = v.parse().map_err(bad)?,
            _ => {}
        }
    }
    if parsed.topic.is_empty() {
        return Err(ApiError::bad_request("topic is required"));
    }
    let bus = st.bus.as_ref().expect("mounted with booking routes");
    let events = bus.events_after(&parsed.topic, parsed.after, parsed.limit).await;
    Ok(ok(&EventsResponse { events }))
}

fn inventory_error(e: InventoryError) -> ApiError {
    match &e {
        InventoryError::SoldOut { option_id } => ApiError::new(StatusCode::CONFLICT, format!("sold out: {}", option_id.0)),
        InventoryError::UnknownOption(_) | InventoryError::UnknownHold(_) => ApiError::not_found(e.to_string()),
        InventoryError::Expired => ApiError::new(StatusCode::GONE, e.to_string()),
        InventoryError::Released => ApiError::new(StatusCode::CONFLICT, e.to_string()),
        InventoryError::Invalid(_) => ApiError::bad_request(e.to_string()),
    }
}

fn inv(st: &AppState) -> &Inventory {
    st.inventory.as_deref().expect("mounted with inventory routes")
}

async fn inventory_hold(State(st): Shared, body: Bytes) -> Result<Response, ApiError> {
    let req: HoldRequest = parse_body(&body)?;
    st.exec
        .run(Role::Inventory, async {
            let (hold_id, expires_at_ms) = inv(&st).hold(&req.items, req.ttl_ms).map_err(inventory_error)?;
            Ok(ok(&HoldResponse { hold_id, expires_at_ms }))
        })
        .await
}

async fn inventory_commit(State(st): Shared, body: Bytes) -> Result<Response, ApiError> {
    let req: HoldRef = parse_body(&body)?;
    st.exec
        .run(Role::Inventory, async {
            inv(&st).commit(&req.hold_id).map_err(inventory_error)?;
            Ok(ok(&req))
        })
        .await
}

async fn inventory_release(State(st): Shared, body: Bytes) -> Result<Response, ApiError> {
    let req: HoldRef = parse_body(&body)?;
    st.exec
        .run(Role::Inventory, async {
            inv(&st).release(&req.hold_id).map_err(inventory_error)?;
            Ok(ok(&req))
        })
        .await
}

async fn availability(State(st): Shared, Path(id): Path<String>) -> Result<Response, ApiError> {
    st.exec
        .run(Role::Inventory, async {
            let a = inv(&st).availability(&OptionId(id)).map_err(inventory_error)?;
            Ok(ok(&a))
        })
        .await
}

async fn profile(State(st): Shared, Path(id): Path<String>) -> Result<Response, ApiError> {
    st.exec
        .run(Role::Profile, async {
            let p = st
                .scenario()
                .user(&id)
                .ok_or_else(|| ApiError::not_found(format!("unknown user {id}")))?;
            let store = st.profiles.as_ref().expect("mounted with profile routes");
            Ok(ok(&ProfileResponse {
                profile: p.clone(),
                confirmed_bookings: store.confirmed(&id),
                last_event_seq: store.last_seq(),
            }))
        })
        .await
}

async fn not_found() -> ApiError {
    ApiError::not_found("no such endpoint")
}

/// Auth (public roles only), request ids and per-endpoint metrics.
async fn envelope(State(st): Shared, mut req: Request, next: Next) -> Response {
    let started = Instant::now();
    let key = endpoint_key(req.method().as_str(), req.uri().path());
    let rid = match req.headers().get(REQUEST_ID_HEADER) {
        Some(v) => v.clone(),
        None => {
            let n = st.next_request.fetch_add(1, Ordering::Relaxed);
            let v = HeaderValue::from_str(&format!("req-{n:08}")).expect("ascii");
            req.headers_mut().insert(REQUEST_ID_HEADER, v.clone());
            v
        }
    };
    let public = matches!(st.role, Role::Monolith | Role::Gateway);
    let mut resp = if public && req.uri().path() != "/health" && !authorized(&st.spec.auth_token, req.headers()) {
        ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized").into_response()
    } else {
        next.run(req).await
    };
    resp.headers_mut().insert(REQUEST_ID_HEADER, rid);
    if key != "GET /metrics" && key != "GET /health" {
        st.metrics.record(&key, resp.status().as_u16(), started.elapsed());
    }
    resp
}

fn authorized(token: &str, headers: &HeaderMap) -> bool {
    if token.is_empty() {
        return true;
    }
    headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .is_some_and(|t| t == token)
}

pub fn router(st: Arc<AppState>) -> Router {
    let role = st.role;
    let mut r = Router::new().route("/health", get(health)).route("/metrics", get(metrics));
    if role == Role::Gateway {
        r = r.fallback(crate::gateway::proxy);
    } else {
        if serves(role, Role::Search) {
            r = r.route("/search", get(search));
        }
        if serves(role, Role::Quote) {
            r = r.route("/quote", post(quote));
        }
        if serves(role, Role::Recommend) {
            r = r.route("/recommend", post(recommend));
        }
        if serves(role, Role::Optimize) {
            r = r.route("/optimize", post(optimize));
        }
        if serves(role, Role::Booking) {
            r = r
                .route("/bookings", post(create_booking))
                .route("/bookings/{id}", get(get_booking))
                .route("/bookings/{id}/{step}", post(booking_step))
                .route("/internal/events", get(events));
        }
        if serves(role, Role::Inventory) {
            r = r
                .route("/inventory/hold", post(inventory_hold))
                .route("/inventory/commit", post(inventory_commit))
                .route("/inventory/release", post(inventory_release))
                .route("/inventory/{option_id}", get(availability));
        }
        if serves(role, Role::Profile) {
            r = r.route("/profiles/{id}", get(profile));
        }
        r = r.fallback(not_found);
    }
    r.layer(middleware::from_fn_with_state(st.clone(), envelope))
        .with_state(st)
}

/// Access for the gateway's proxy handler.
impl AppState {
    pub fn gateway(&self) -> &Gateway {
        self.gateway.as_ref().expect("gateway role")
    }
}
