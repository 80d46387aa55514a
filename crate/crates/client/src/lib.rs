//! Thin async client for the reservation API.
//!
//! `send` returns the raw status and body, which is what the load generator
//! and the equivalence checks need. The typed helpers decode success bodies
//! and turn error statuses into [`ClientError::Api`].

use std::time::Duration;

use resa_core::model::TravelOption;
use resa_core::wire::{
    Availability, BookingRecord, BookingRequest, ErrorBody, EventsResponse, Health, HoldRef,
    HoldRequest, HoldResponse, OptimizeRequest, OptimizeResponse, ProfileResponse, QuoteRequest,
    QuoteResponse, RecommendRequest, RecommendResponse, SearchResponse,
};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub use reqwest::Method;

pub const REQUEST_ID_HEADER: &str = "x-request-id";
pub const PAYMENT_TEST_HEADER: &str = "x-test-payment";

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("transport: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("HTTP {status}: {}", .body.error)]
    Api { status: u16, body: ErrorBody },
    #[error("undecodable body (HTTP {status}): {source}")]
    Decode {
        status: u16,
        #[source]
        source: serde_json::Error,
    },
}

impl ClientError {
    pub fn status(&self) -> Option<u16> {
        match self {
            ClientError::Api { status, .. } | ClientError::Decode { status, .. } => Some(*status),
            ClientError::Transport(e) => e.status().map(|s| s.as_u16()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawResponse {
    pub status: u16,
    pub body: Vec<u8>,
    pub request_id: Option<String>,
}

impl RawResponse {
    pub fn json<T: DeserializeOwned>(&self) -> Result<T, ClientError> {
        if self.status >= 400 {
            let body = serde_json::from_slice(&self.body)
                .unwrap_or_else(|_| ErrorBody::new(String::from_utf8_lossy(&self.body).into_owned()));
            return Err(ClientError::Api {
                status: self.status,
                body,
            });
        }
        serde_json::from_slice(&self.body).map_err(|source| ClientError::Decode {
            status: self.status,
            source,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Client {
    http: reqwest::Client,
    base: String,
    token: Option<String>,
}

/// Connection pool settings suited to many concurrent callers of one host.
pub fn http_client(timeout: Duration) -> reqwest::Client {
    reqwest::Client::builder()
        .timeout(timeout)
        .pool_idle_timeout(Duration::from_secs(30))
        .tcp_nodelay(true)
        .build()
        .expect("static client config")
}

impl Client {
    pub fn new(base: impl Into<String>, token: Option<String>) -> Self {
        Self::with_http(http_client(Duration::from_secs(30)), base, token)
    }

    pub fn with_http(http: reqwest::Client, base: impl Into<String>, token: Option<String>) -> Self {
        Client {
            http,
            base: base.into().trim_end_matches('/').to_owned(),
            token,
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    pub async fn send(
        &self,
        method: Method,
        path_and_query: &str,
        body: Option<Vec<u8>>,
        headers: &[(&str, &str)],
    ) -> Result<RawResponse, reqwest::Error> {
        let mut req = self.http.request(method, format!("{}{}", self.base, path_and_query));
        if let Some(t) = &self.token {
            req = req.bearer_auth(t);
        }
        for (k, v) in headers {
            req = req.header(*k, *v);
        }
        if let Some(b) = body {
            req = req.header("content-type", "application/json").body(b);
        }
        let resp = req.send().await?;
        let status = resp.status().as_u16();
        let request_id = resp
            .headers()
            .get(REQUEST_ID_HEADER)
            .and_then(|v| v.to_str().ok())
            .map(str::to_owned);
        let body = resp.bytes().await?.to_vec();
        Ok(RawResponse {
            status,
            body,
            request_id,
        })
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T, ClientError> {
        self.send(Method::GET, path, None, &[]).await?.json()
    }

    async fn post<B: Serialize, T: DeserializeOwned>(
        &self,
        path: &str,
        body: &B,
        headers: &[(&str, &str)],
    ) -> Result<T, ClientError> {
        let bytes = serde_json::to_vec(body).expect("serializable body");
        self.send(Method::POST, path, Some(bytes), headers).await?.json()
    }

    pub async fn health(&self) -> Result<Health, ClientError> {
        self.get("/health").await
    }

    pub async fn metrics(&self) -> Result<serde_json::Value, ClientError> {
        self.get("/metrics").await
    }

    pub async fn search(
        &self,
        origin: &str,
        dest: &str,
        from: Option<i64>,
        to: Option<i64>,
    ) -> Result<Vec<TravelOption>, ClientError> {
        let r: SearchResponse = self.get(&search_path(origin, dest, from, to)).await?;
        Ok(r.options)
    }

    pub async fn quote(&self, req: &QuoteRequest) -> Result<QuoteResponse, ClientError> {
        self.post("/quote", req, &[]).await
    }

    pub async fn recommend(&self, req: &RecommendRequest) -> Result<RecommendResponse, ClientError> {
        self.post("/recommend", req, &[]).await
    }

    pub async fn optimize(&self, req: &OptimizeRequest) -> Result<OptimizeResponse, ClientError> {
        self.post("/optimize", req, &[]).await
    }

    pub async fn book(&self, req: &BookingRequest) -> Result<BookingRecord, ClientError> {
        self.post("/bookings", req, &[]).await
    }

    /// Books with the mock payment processor forced to decline.
    pub async fn book_declined(&self, req: &BookingRequest) -> Result<BookingRecord, ClientError> {
        self.post("/bookings", req, &[(PAYMENT_TEST_HEADER, "decline")]).await
    }

    pub async fn booking(&self, id: &str) -> Result<BookingRecord, ClientError> {
        self.get(&format!("/bookings/{id}")).await
    }

    async fn booking_step(&self, id: &str, step: &str) -> Result<BookingRecord, ClientError> {
        self.post(&format!("/bookings/{id}/{step}"), &serde_json::json!({}), &[]).await
    }

    pub async fn pay(&self, id: &str) -> Result<BookingRecord, ClientError> {
        self.booking_step(id, "pay").await
    }

    pub async fn confirm(&self, id: &str) -> Result<BookingRecord, ClientError> {
        self.booking_step(id, "confirm").await
    }

    pub async fn cancel(&self, id: &str) -> Result<BookingRecord, ClientError> {
        self.booking_step(id, "cancel").await
    }

    pub async fn hold(&self, req: &HoldRequest) -> Result<HoldResponse, ClientError> {
        self.post("/inventory/hold", req, &[]).await
    }

    pub async fn commit(&self, hold_id: &str) -> Result<HoldRef, ClientError> {
        self.post("/inventory/commit", &HoldRef { hold_id: hold_id.into() }, &[]).await
    }

    pub async fn release(&self, hold_id: &str) -> Result<HoldRef, ClientError> {
        self.post("/inventory/release", &HoldRef { hold_id: hold_id.into() }, &[]).await
    }

    pub async fn availability(&self, option_id: &str) -> Result<Availability, ClientError> {
        self.get(&format!("/inventory/{option_id}")).await
    }

    pub async fn events(&self, topic: &str, after: u64, limit: usize) -> Result<EventsResponse, ClientError> {
        self.get(&format!("/internal/events?topic={topic}&after={after}&limit={limit}")).await
    }

    pub async fn profile(&self, user_id: &str) -> Result<ProfileResponse, ClientError> {
        self.get(&format!("/profiles/{user_id}")).await
    }
}

pub fn search_path(origin: &str, dest: &str, from: Option<i64>, to: Option<i64>) -> String {
    let mut p = format!("/search?origin={origin}&dest={dest}");
    if let Some(f) = from {
        p.push_str(&format!("&from={f}"));
    }
    if let Some(t) = to {
        p.push_str(&format!("&to={t}"));
    }
    p
}
