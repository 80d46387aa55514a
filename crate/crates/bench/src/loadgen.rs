//! Closed-loop load: each virtual user sends its next planned request only
//! after the previous one has completed (plus think time).
//!
//! A response counts when it completes inside the measurement window
//! `[start + warmup, start + warmup + duration]`. Requests still in flight
//! at the end of the window are abandoned and not counted. Latency is taken
//! on the client, from the start of the send to the end of the body read.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use resa_client::{Client, REQUEST_ID_HEADER};
use resa_core::histogram::LatencyHistogram;
use tokio::time::Instant;

use crate::report::{BenchReport, CostReport, EndpointReport, LatencySummary};
use crate::resources::sample_resources;
use crate::workload::{Endpoint, UserPlan, WorkloadContext};
use crate::{BenchError, LoadProfile, Target};

#[derive(Default)]
struct Tally {
    hist: LatencyHistogram,
    per_endpoint: BTreeMap<Endpoint, (u64, u64, LatencyHistogram)>,
    status: BTreeMap<String, u64>,
    completed: u64,
    errors: u64,
}

impl Tally {
    fn record(&mut self, e: Endpoint, status: Option<u16>, ms: f64) {
        let error = status.is_none_or(|s| s >= 500);
        let key = status.map(|s| s.to_string()).unwrap_or_else(|| "transport".into());
        *self.status.entry(key).or_default() += 1;
        let ep = self.per_endpoint.entry(e).or_default();
        ep.0 += 1;
        ep.2.record(ms);
        if error {
            ep.1 += 1;
            self.errors += 1;
        } else {
            self.completed += 1;
        }
        self.hist.record(ms);
    }

    fn merge(&mut self, o: Tally) {
        self.hist.merge(&o.hist);
        for (e, (c, err, h)) in o.per_endpoint {
            let ep = self.per_endpoint.entry(e).or_default();
            ep.0 += c;
            ep.1 += err;
            ep.2.merge(&h);
        }
        for (k, v) in o.status {
            *self.status.entry(k).or_default() += v;
        }
        self.completed += o.completed;
        self.errors += o.errors;
    }
}

/// Deployment mode and process ids as reported by the target's /metrics.
async fn describe(client: &Client) -> (Option<String>, Vec<u32>) {
    let Ok(m) = client.metrics().await else {
        return (None, Vec::new());
    };
    let mode = m["mode"].as_str().map(str::to_owned);
    let mut pids: Vec<u32> = m["processes"]
        .as_array()
        .map(|a| a.iter().filter_map(|p| p[1].as_u64()).map(|p| p as u32).collect())
        .unwrap_or_default();
    pids.sort_unstable();
    pids.dedup();
    (mode, pids)
}

pub async fn run_load(target: &Target, ctx: Arc<WorkloadContext>, profile: &LoadProfile) -> Result<BenchReport, BenchError> {
    profile.validate()?;
    if profile.duration_s <= 0.0 {
        return Err(BenchError::EmptyWindow);
    }
    let http = reqwest_client(profile);
    let client = Client::with_http(http, target.url.clone(), target.token.clone());
    client.health().await.map_err(|e| BenchError::Unreachable {
        url: target.url.clone(),
        msg: e.to_string(),
    })?;
    let (mode, pids) = describe(&client).await;

    let start = Instant::now();
    let measure_start = start + Duration::from_secs_f64(profile.warmup_s);
    let end = measure_start + Duration::from_secs_f64(profile.duration_s);
    let think = Duration::from_secs_f64(profile.think_time_ms / 1000.0);
    let interval = Duration::from_millis(profile.sample_interval_ms);

    let sampler = tokio::spawn(async move {
        tokio::time::sleep_until(measure_start).await;
        sample_resources(pids, interval, tokio::time::sleep_until(end)).await
    });
    let users: Vec<_> = (0..profile.concurrency)
        .map(|u| {
            let client = client.clone();
            let mut plan = UserPlan::new(ctx.clone(), profile.mix, profile.seed, u);
            tokio::spawn(async move {
                let mut t = Tally::default();
                while Instant::now() < end {
                    let req = plan.next_request();
                    let t0 = Instant::now();
                    let headers = [(REQUEST_ID_HEADER, req.id.as_str())];
                    let send = client.send(req.method.clone(), &req.path, req.body.clone(), &headers);
                    let Ok(res) = tokio::time::timeout_at(end, send).await else {
                        break;
                    };
                    let t1 = Instant::now();
                    if t1 >= measure_start {
                        let ms = t1.duration_since(t0).as_secs_f64() * 1000.0;
                        t.record(req.endpoint, res.ok().map(|r| r.status), ms);
                    }
                    if !think.is_zero() {
                        tokio::time::sleep_until((t1 + think).min(end)).await;
                    }
                }
                t
            })
        })
        .collect();
    let mut tally = Tally::default();
    for u in users {
        if let Ok(t) = u.await {
            tally.merge(t);
        }
    }
    let resources = sampler.await.unwrap_or_default();

    let window_s = profile.duration_s;
    let total = tally.completed + tally.errors;
    let cost_total = profile.cost.cost(resources.cpu_seconds, resources.gb_seconds);
    Ok(BenchReport {
        mode,
        target: target.url.clone(),
        profile: profile.clone(),
        window_s,
        completed: tally.completed,
        errors: tally.errors,
        error_rate: if total == 0 { 0.0 } else { tally.errors as f64 / total as f64 },
        throughput: tally.completed as f64 / window_s,
        latency: LatencySummary::of(&tally.hist),
        endpoints: tally
            .per_endpoint
            .iter()
            .map(|(e, (c, err, h))| {
                (
                    e.name().to_owned(),
                    EndpointReport {
                        count: *c,
                        errors: *err,
                        latency: LatencySummary::of(h),
                    },
                )
            })
            .collect(),
        histogram: tally.hist,
        status_counts: tally.status,
        cost: CostReport {
            model: profile.cost,
            total: cost_total,
            per_request: if tally.completed == 0 { 0.0 } else { cost_total / tally.completed as f64 },
        },
        resources,
    })
}

fn reqwest_client(profile: &LoadProfile) -> reqwest::Client {
    reqwest::Client::builder()
        .timeout(Duration::from_millis(profile.request_timeout_ms))
        .pool_max_idle_per_host(profile.concurrency)
        .tcp_nodelay(true)
        .build()
        .expect("static client config")
}
