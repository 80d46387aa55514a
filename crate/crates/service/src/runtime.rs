//! Request execution: the worker pool, the optional coarse lock, synthetic
//! service time, and per-endpoint metrics.
//!
//! The monolith runs every handler under one process-wide lock, held across
//! the synthetic service time, so its datastore access is fully serialized.
//! Service processes have no such lock; their stores lock per key.

use std::collections::BTreeMap;
use std::future::Future;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use resa_core::histogram::LatencyHistogram;
use serde::Serialize;
use tokio::sync::Semaphore;

use crate::config::{Role, WorkCost, WorkModel};
use crate::error::ApiError;

#[derive(Debug)]
pub struct Executor {
    pool: Semaphore,
    pool_size: usize,
    waiting: AtomicUsize,
    max_queue: usize,
    coarse: Option<tokio::sync::Mutex<()>>,
    work: WorkModel,
    rejected: AtomicU64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExecutorStats {
    pub pool_size: usize,
    pub busy: usize,
    pub waiting: usize,
    pub rejected: u64,
    pub coarse_lock: bool,
}

/// Sleeps the delay, then spins for the busy time.
pub async fn apply_work(cost: WorkCost) {
    if cost.delay_ms > 0.0 {
        tokio::time::sleep(Duration::from_secs_f64(cost.delay_ms / 1000.0)).await;
    }
    if cost.busy_us > 0 {
        let until = Instant::now() + Duration::from_micros(cost.busy_us);
        while Instant::now() < until {
            std::hint::spin_loop();
        }
    }
}

impl Executor {
    pub fn new(pool_size: usize, max_queue: usize, coarse_lock: bool, work: WorkModel) -> Self {
        Executor {
            pool: Semaphore::new(pool_size),
            pool_size,
            waiting: AtomicUsize::new(0),
            max_queue,
            coarse: coarse_lock.then(|| tokio::sync::Mutex::new(())),
            work,
            rejected: AtomicU64::new(0),
        }
    }

    /// Runs `f` on a worker, after the endpoint's synthetic cost. A full queue
    /// is a 503.
    pub async fn run<T, F>(&self, role: Role, f: F) -> Result<T, ApiError>
    where
        F: Future<Output = Result<T, ApiError>>,
    {
        let permit = match self.pool.try_acquire() {
            Ok(p) => p,
            Err(_) => {
                if self.waiting.fetch_add(1, Ordering::SeqCst) >= self.max_queue {
                    self.waiting.fetch_sub(1, Ordering::SeqCst);
                    self.rejected.fetch_add(1, Ordering::Relaxed);
                    return Err(ApiError::unavailable("overloaded"));
                }
                let p = self.pool.acquire().await;
                self.waiting.fetch_sub(1, Ordering::SeqCst);
                p.expect("pool never closes")
            }
        };
        let _coarse = match &self.coarse {
            Some(m) => Some(m.lock().await),
            None => None,
        };
        apply_work(self.work.cost(role)).await;
        let out = f.await;
        drop(permit);
        out
    }

    pub fn stats(&self) -> ExecutorStats {
        ExecutorStats {
            pool_size: self.pool_size,
            busy: self.pool_size - self.pool.available_permits(),
            waiting: self.waiting.load(Ordering::SeqCst),
            rejected: self.rejected.load(Ordering::Relaxed),
            coarse_lock: self.coarse.is_some(),
        }
    }
}

#[derive(Debug, Default, Clone)]
struct EndpointStats {
    count: u64,
    errors: u64,
    latency: LatencyHistogram,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndpointSnapshot {
    pub count: u64,
    /// Responses with status >= 500.
    pub errors: u64,
    pub mean_ms: Option<f64>,
    pub p50_ms: Option<f64>,
    pub p95_ms: Option<f64>,
    pub p99_ms: Option<f64>,
    pub max_ms: Option<f64>,
    /// Non-empty buckets as (upper bound ms, count); the overflow bucket is null.
    pub buckets: Vec<(Option<f64>, u64)>,
}

/// Server-side latency per endpoint, measured around the whole handler.
#[derive(Debug)]
pub struct Metrics {
    started: Instant,
    endpoints: Mutex<BTreeMap<String, EndpointStats>>,
}

impl Default for Metrics {
    fn default() -> Self {
        Metrics {
            started: Instant::now(),
            endpoints: Mutex::new(BTreeMap::new()),
        }
    }
}

impl Metrics {
    pub fn record(&self, endpoint: &str, status: u16, elapsed: Duration) {
        let mut m = self.endpoints.lock().unwrap_or_else(|e| e.into_inner());
        let e = m.entry(endpoint.to_owned()).or_default();
        e.count += 1;
        if status >= 500 {
            e.errors += 1;
        }
        e.latency.record(elapsed.as_secs_f64() * 1000.0);
    }

    pub fn uptime(&self) -> Duration {
        self.started.elapsed()
    }

    pub fn snapshot(&self) -> BTreeMap<String, EndpointSnapshot> {
        let m = self.endpoints.lock().unwrap_or_else(|e| e.into_inner());
        m.iter()
            .map(|(k, e)| {
                let h = &e.latency;
                let bounds = resa_core::histogram::bucket_bounds();
                let buckets = h
                    .counts()
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| **c > 0)
                    .map(|(i, c)| (bounds.get(i).copied(), *c))
                    .collect();
                (
                    k.clone(),
                    EndpointSnapshot {
                        count: e.count,
                        errors: e.errors,
                        mean_ms: h.mean(),
                        p50_ms: h.percentile(50.0),
                        p95_ms: h.percentile(95.0),
                        p99_ms: h.percentile(99.0),
                        max_ms: h.max(),
                        buckets,
                    },
                )
            })
            .collect()
    }
}

/// Metric key for a request path: the route family plus the booking step.
pub fn endpoint_key(method: &str, path: &str) -> String {
    let segs: Vec<&str> = path.trim_matches('/').split('/').filter(|s| !s.is_empty()).collect();
    let family = segs.first().copied().unwrap_or("root");
    match (family, segs.len()) {
        ("bookings", 3) => format!("{method} /bookings/*/{}", segs[2]),
        ("inventory", 2) if matches!(segs[1], "hold" | "commit" | "release") => format!("{method} /inventory/{}", segs[1]),
        (_, n) if n >= 2 => format!("{method} /{family}/*"),
        _ => format!("{method} /{family}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn endpoint_keys_group_ids() {
        assert_eq!(endpoint_key("GET", "/search"), "GET /search");
        assert_eq!(endpoint_key("POST", "/bookings/bk-1/pay"), "POST /bookings/*/pay");
        assert_eq!(endpoint_key("GET", "/bookings/bk-1"), "GET /bookings/*");
        assert_eq!(endpoint_key("POST", "/inventory/hold"), "POST /inventory/hold");
        assert_eq!(endpoint_key("GET", "/inventory/t-1"), "GET /inventory/*");
        assert_eq!(endpoint_key("GET", "/"), "GET /root");
    }

    #[test]
    fn metrics_count_and_errors() {
        let m = Metrics::default();
        m.record("GET /search", 200, Duration::from_millis(3));
        m.record("GET /search", 503, Duration::from_millis(5));
        let s = m.snapshot();
        let e = &s["GET /search"];
        assert_eq!((e.count, e.errors), (2, 1));
        assert_eq!(e.buckets.iter().map(|b| b.1).sum::<u64>(), 2);
    }

    #[tokio::test(start_paused = true)]
    async fn coarse_lock_serializes_work() {
        let mut w = WorkModel::zero();
        w.search = WorkCost::delay(10.0);
        let ex = Arc::new(Executor::new(64, 512, true, w.clone()));
        let t0 = tokio::time::Instant::now();
        let hs: Vec<_> = (0..10)
            .map(|_| {
                let ex = ex.clone();
                tokio::spawn(async move { ex.run(Role::Search, async { Ok(()) }).await })
            })
            .collect();
        for h in hs {
            h.await.unwrap().unwrap();
        }
        assert_eq!(t0.elapsed(), Duration::from_millis(100));

        let ex = Arc::new(Executor::new(64, 512, false, w));
        let t0 = tokio::time::Instant::now();
        let hs: Vec<_> = (0..10)
            .map(|_| {
                let ex = ex.clone();
                tokio::spawn(async move { ex.run(Role::Search, async { Ok(()) }).await })
            })
            .collect();
        for h in hs {
            h.await.unwrap().unwrap();
        }
        assert_eq!(t0.elapsed(), Duration::from_millis(10));
    }

    #[tokio::test(start_paused = true)]
    async fn full_queue_rejects_with_503() {
        let mut w = WorkModel::zero();
        w.search = WorkCost::delay(50.0);
        let ex = Arc::new(Executor::new(1, 2, false, w));
        let hs: Vec<_> = (0..5)
            .map(|_| {
                let ex = ex.clone();
                tokio::spawn(async move { ex.run(Role::Search, async { Ok(()) }).await })
            })
            .collect();
        let mut rejected = 0;
        for h in hs {
            if let Err(e) = h.await.unwrap() {
                assert_eq!(e.status.as_u16(), 503);
                rejected += 1;
            }
        }
        assert_eq!(rejected, 2);
        assert_eq!(ex.stats().rejected, 2);
    }
}
