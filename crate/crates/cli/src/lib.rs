//! Library half of the `resa` binary: artifact I/O and the end-to-end
//! scenario pipeline, kept here so tests can drive them directly.

pub mod files;
pub mod pipeline;

use std::path::Path;
use std::sync::Arc;

use resa_bench::WorkloadContext;
use resa_core::synthgen::ScenarioBundle;

pub use pipeline::{run_scenario, Manifest, RampSpec, RunError, ScenarioRunSpec};

/// Workload context for benchmarking against a deployment of `dir`.
pub fn workload_context(dir: &Path) -> anyhow::Result<Arc<WorkloadContext>> {
    let b = ScenarioBundle::read(dir)?;
    let horizon = b.meta.params.horizon_days;
    let ctx = WorkloadContext::new(b.catalog, &b.users, horizon).map_err(anyhow::Error::msg)?;
    Ok(Arc::new(ctx))
}
