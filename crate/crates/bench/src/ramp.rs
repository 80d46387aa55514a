//! Ramp to failure: run the base profile at increasing concurrency until a
//! step breaches the thresholds or the maximum is reached.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::report::BenchReport;
use crate::workload::WorkloadContext;
use crate::{run_load, BenchError, LoadProfile, Target};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub max_error_rate: f64,
    pub max_p99_ms: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            max_error_rate: 0.01,
            max_p99_ms: 5000.0,
        }
    }
}

impl Thresholds {
    pub fn breached(&self, r: &BenchReport) -> bool {
        r.error_rate > self.max_error_rate || r.latency.p99_ms > self.max_p99_ms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampStep {
    pub concurrency: usize,
    pub report: BenchReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampResult {
    pub steps: Vec<RampStep>,
    /// Lowest tested concurrency that breached the thresholds.
    pub failure_point: Option<usize>,
    pub max: usize,
    pub thresholds: Thresholds,
}

impl RampResult {
    /// Relative p95 growth from the first step to the failure point (or the
    /// last step when nothing failed).
    pub fn p95_increase(&self) -> Option<f64> {
        let first = self.steps.first()?.report.latency.p95_ms;
        let last = self.steps.last()?.report.latency.p95_ms;
        (first > 0.0).then(|| (last - first) / first)
    }
}

pub fn concurrency_steps(start: usize, step: usize, max: usize) -> Result<Vec<usize>, BenchError> {
    if start == 0 || step == 0 || max < start {
        return Err(BenchError::InvalidRamp(format!(
            "need 1 <= start <= max and step >= 1 (start {start}, step {step}, max {max})"
        )));
    }
    Ok((start..=max).step_by(step).collect())
}

pub async fn ramp_to_failure(
    target: &Target,
    ctx: Arc<WorkloadContext>,
    start: usize,
    step: usize,
    max: usize,
    base: &LoadProfile,
    thresholds: Thresholds,
) -> Result<RampResult, BenchError> {
    let levels = concurrency_steps(start, step, max)?;
    let mut out = RampResult {
        steps: Vec::new(),
        failure_point: None,
        max,
        thresholds,
    };
    for c in levels {
        let profile = LoadProfile {
            concurrency: c,
            ..base.clone()
        };
        let report = run_load(target, ctx.clone(), &profile).await?;
        let failed = thresholds.breached(&report);
        tracing::info!(
            concurrency = c,
            throughput = report.throughput,
            p99_ms = report.latency.p99_ms,
            error_rate = report.error_rate,
            failed,
            "ramp step"
        );
        out.steps.push(RampStep { concurrency: c, report });
        if failed {
            out.failure_point = Some(c);
            break;
        }
    }
    Ok(out)
}
