//! Measurement harness: closed-loop virtual users against a running
//! deployment, ramp-to-failure runs, process resource sampling, a synthetic
//! cost model and side-by-side comparison reports.

pub mod loadgen;
pub mod ramp;
pub mod report;
pub mod resources;
pub mod stub;
pub mod workload;

use serde::{Deserialize, Serialize};

pub use loadgen::run_load;
pub use ramp::{ramp_to_failure, RampResult, RampStep, Thresholds};
pub use report::{compare_reports, render_report, BenchReport, Comparison, CostModel, Format};
pub use workload::{Endpoint, Mix, WorkloadContext};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoadProfile {
    /// Closed-loop virtual users.
    pub concurrency: usize,
    pub duration_s: f64,
    /// Excluded from every statistic.
    pub warmup_s: f64,
    pub mix: Mix,
    pub think_time_ms: f64,
    pub seed: u64,
    pub request_timeout_ms: u64,
    pub sample_interval_ms: u64,
    pub cost: CostModel,
}

impl Default for LoadProfile {
    fn default() -> Self {
        LoadProfile {
            concurrency: 10,
            duration_s: 10.0,
            warmup_s: 2.0,
            mix: Mix::default(),
            think_time_ms: 0.0,
            seed: 0,
            request_timeout_ms: 30_000,
            sample_interval_ms: 1_000,
            cost: CostModel::default(),
        }
    }
}

impl LoadProfile {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::InvalidProfile(m.into()));
        if self.concurrency == 0 {
            return bad("concurrency must be >= 1");
        }
        if !(self.duration_s >= 0.0 && self.duration_s.is_finite()) {
            return bad("duration_s must be a non-negative number");
        }
        if !(self.warmup_s >= 0.0 && self.warmup_s.is_finite()) {
            return bad("warmup_s must be a non-negative number");
        }
        if !(self.think_time_ms >= 0.0 && self.think_time_ms.is_finite()) {
            return bad("think_time_ms must be a non-negative number");
        }
        if self.sample_interval_ms == 0 {
            return bad("sample_interval_ms must be >= 1");
        }
        self.mix.validate().map_err(BenchError::InvalidProfile)
    }
}

/// Where to send load, with the bearer token of the public entry point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Target {
    pub url: String,
    pub token: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid load profile: {0}")]
    InvalidProfile(String),
    #[error("empty measurement window")]
    EmptyWindow,
    #[error("deployment at {url} unreachable: {msg}")]
    Unreachable { url: String, msg: String },
    #[error("invalid ramp: {0}")]
    InvalidRamp(String),
}
