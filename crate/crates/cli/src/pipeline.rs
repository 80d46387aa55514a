//! End-to-end scenario run: datagen, train, sample GA traces, then serve,
//! bench and stop each deployment in turn, and compare. Every stage is
//! timed and recorded; a failing stage aborts the run but the manifest of
//! what was produced so far is still written.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::Context as _;
use resa_bench::{compare_reports, ramp_to_failure, render_report, run_load, BenchReport, Format, LoadProfile, Target, Thresholds};
use resa_core::forecast::{train_models, TrainConfig, TrainedModels, MODELS_FILE};
use resa_core::optimizer::{evolve, GaConfig};
use resa_core::rng::seeded;
use resa_core::sustainability::CarbonConfig;
use resa_core::synthgen::{gen_scenario, sample_trip_request, ScenarioBundle, ScenarioParams, BUNDLE_FILES};
use resa_service::{Deployment, DeploymentSpec, Mode, Spawner};
use serde::{Deserialize, Serialize};

use crate::files::{self, Artifact};

/// Stream offset of the sampled optimize requests.
pub const OPTIMIZE_STREAM_BASE: u64 = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RampSpec {
    pub start: usize,
    pub step: usize,
    pub max: usize,
    pub thresholds: Thresholds,
}

impl Default for RampSpec {
    fn default() -> Self {
        RampSpec {
            start: 50,
            step: 50,
            max: 1000,
            thresholds: Thresholds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioRunSpec {
    /// Overrides the seeds of data generation, load and GA samples.
    pub seed: Option<u64>,
    pub scenario_dir: PathBuf,
    /// Generate the scenario into `scenario_dir`; when absent the directory
    /// must already hold one.
    pub datagen: Option<ScenarioParams>,
    pub train: bool,
    pub train_config: TrainConfig,
    pub optimize_samples: usize,
    pub monolith: DeploymentSpec,
    pub microservices: DeploymentSpec,
    pub profile: LoadProfile,
    pub ramp: Option<RampSpec>,
    pub out_dir: PathBuf,
}

impl Default for ScenarioRunSpec {
    fn default() -> Self {
        ScenarioRunSpec {
            seed: None,
            scenario_dir: "scenario".into(),
            datagen: None,
            train: true,
            train_config: TrainConfig::default(),
            optimize_samples: 3,
            monolith: DeploymentSpec::new(Mode::Monolith),
            microservices: DeploymentSpec::new(Mode::Microservices),
            profile: LoadProfile::default(),
            ramp: None,
            out_dir: "out".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub ok: bool,
    pub seconds: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: Option<u64>,
    pub ok: bool,
    pub stages: Vec<StageRecord>,
    pub artifacts: Vec<Artifact>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("stage {stage} failed: {msg}")]
    Stage { stage: String, msg: String },
    #[error("cannot write run output: {0}")]
    Output(String),
}

impl RunError {
    pub fn stage(&self) -> Option<&str> {
        match self {
            RunError::Stage { stage, .. } => Some(stage),
            RunError::Output(_) => None,
        }
    }
}

pub fn datagen(params: &ScenarioParams, dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let bundle = gen_scenario(params)?;
    bundle.write(dir)?;
    Ok(BUNDLE_FILES.iter().map(|f| dir.join(f)).collect())
}

pub fn train(dir: &Path, config: &TrainConfig) -> anyhow::Result<(TrainedModels, PathBuf)> {
    let bundle = ScenarioBundle::read(dir)?;
    let models = train_models(&bundle.history, config)?;
    let path = dir.join(MODELS_FILE);
    files::write_json(&path, &models)?;
    Ok((models, path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeSample {
    pub seed: u64,
    pub request: resa_core::TripRequest,
    pub ga: GaConfig,
    pub optimum: Option<resa_core::optimizer::Optimum>,
    pub trace: Option<resa_core::optimizer::GaTrace>,
    pub error: Option<String>,
}

/// GA runs on `n` requests sampled from the scenario, one stream each.
pub fn optimize_samples(bundle: &ScenarioBundle, seed: u64, n: usize, ga: &GaConfig, carbon: &CarbonConfig) -> Vec<OptimizeSample> {
    (0..n)
        .map(|i| {
            let mut rng = seeded(seed, OPTIMIZE_STREAM_BASE + i as u64);
            let request = sample_trip_request(&bundle.catalog, bundle.meta.params.horizon_days, &mut rng);
            let ga = GaConfig {
                seed: seed.wrapping_add(i as u64),
                ..ga.clone()
            };
            let (optimum, trace, error) = match evolve(&bundle.catalog, &request, &ga, carbon) {
                Ok((o, t)) => (Some(o), Some(t), None),
                Err(e) => (None, None, Some(e.to_string())),
            };
            OptimizeSample {
                seed,
                request,
                ga,
                optimum,
                trace,
                error,
            }
        })
        .collect()
}

pub async fn start_deployment(spec: DeploymentSpec, spawner: Spawner) -> anyhow::Result<Deployment> {
    tokio::task::spawn_blocking(move || Deployment::start(&spec, &spawner))
        .await?
        .map_err(anyhow::Error::from)
}

pub async fn stop_deployment(d: Deployment) {
    let _ = tokio::task::spawn_blocking(move || d.stop()).await;
}

fn token_of(spec: &DeploymentSpec) -> Option<String> {
    (!spec.auth_token.is_empty()).then(|| spec.auth_token.clone())
}

struct Run {
    out_dir: PathBuf,
    seed: Option<u64>,
    stages: Vec<StageRecord>,
    artifacts: Vec<PathBuf>,
}

impl Run {
    fn finish(&mut self, name: &str, started: Instant, r: anyhow::Result<Vec<PathBuf>>) -> Result<(), RunError> {
        let seconds = started.elapsed().as_secs_f64();
        match r {
            Ok(paths) => {
                tracing::info!(stage = name, seconds, "stage done");
                self.artifacts.extend(paths);
                self.stages.push(StageRecord {
                    name: name.into(),
                    ok: true,
                    seconds,
                    error: None,
                });
                Ok(())
            }
            Err(e) => {
                let msg = format!("{e:#}");
                tracing::error!(stage = name, error = %msg, "stage failed");
                self.stages.push(StageRecord {
                    name: name.into(),
                    ok: false,
                    seconds,
                    error: Some(msg.clone()),
                });
                self.write_manifest()?;
                Err(RunError::Stage {
                    stage: name.into(),
                    msg,
                })
            }
        }
    }

    fn write_manifest(&self) -> Result<Manifest, RunError> {
        let artifacts = self
            .artifacts
            .iter()
            .map(|p| files::describe(&self.out_dir, p))
            .collect::<anyhow::Result<Vec<_>>>()
            .map_err(|e| RunError::Output(format!("{e:#}")))?;
        let m = Manifest {
            seed: self.seed,
            ok: self.stages.iter().all(|s| s.ok),
            stages: self.stages.clone(),
            artifacts,
        };
        files::write_json(&self.out_dir.join(MANIFEST_FILE), &m).map_err(|e| RunError::Output(format!("{e:#}")))?;
        Ok(m)
    }
}

async fn bench_mode(
    run: &mut Run,
    spec: &ScenarioRunSpec,
    deployment: &DeploymentSpec,
    spawner: &Spawner,
    ctx: Arc<resa_bench::WorkloadContext>,
) -> Result<BenchReport, RunError> {
    let name = deployment.mode.to_string();
    let t = Instant::now();
    let started = start_deployment(deployment.clone(), spawner.clone()).await;
    let d = match started {
        Ok(d) => {
            run.finish(&format!("serve:{name}"), t, Ok(Vec::new()))?;
            d
        }
        Err(e) => return Err(run.finish(&format!("serve:{name}"), t, Err(e)).unwrap_err()),
    };
    let target = Target {
        url: d.url().to_owned(),
        token: token_of(deployment),
    };

    let t = Instant::now();
    let path = run.out_dir.join("reports").join(format!("{name}.json"));
    let report = run_load(&target, ctx.clone(), &spec.profile).await;
    let outcome = report
        .as_ref()
        .map_err(|e| anyhow::anyhow!("{e}"))
        .and_then(|r| files::write_json(&path, r).map(|_| vec![path.clone()]));
    if let Err(e) = run.finish(&format!("bench:{name}"), t, outcome) {
        stop_deployment(d).await;
        return Err(e);
    }
    let report = report.expect("checked above");

    if let Some(r) = &spec.ramp {
        let t = Instant::now();
        let path = run.out_dir.join("ramps").join(format!("{name}.json"));
        let outcome = ramp_to_failure(&target, ctx, r.start, r.step, r.max, &spec.profile, r.thresholds)
            .await
            .map_err(|e| anyhow::anyhow!("{e}"))
            .and_then(|res| files::write_json(&path, &res).map(|_| vec![path.clone()]));
        if let Err(e) = run.finish(&format!("ramp:{name}"), t, outcome) {
            stop_deployment(d).await;
            return Err(e);
        }
    }

    let t = Instant::now();
    stop_deployment(d).await;
    run.finish(&format!("stop:{name}"), t, Ok(Vec::new()))?;
    Ok(report)
}

/// Runs every stage of `spec`. Relative paths in the run spec are resolved
/// against `base`; service processes are started from `exe`.
pub async fn run_scenario(spec: &ScenarioRunSpec, base: &Path, exe: &Path) -> Result<Manifest, RunError> {
    let mut spec = spec.clone();
    spec.scenario_dir = files::resolve(base, &spec.scenario_dir);
    spec.out_dir = files::resolve(base, &spec.out_dir);
    spec.monolith.mode = Mode::Monolith;
    spec.microservices.mode = Mode::Microservices;
    if let Some(seed) = spec.seed {
        if let Some(p) = spec.datagen.as_mut() {
            p.seed = seed;
        }
        spec.profile.seed = seed;
    }
    std::fs::create_dir_all(&spec.out_dir).map_err(|e| RunError::Output(format!("{}: {e}", spec.out_dir.display())))?;
    let mut run = Run {
        out_dir: spec.out_dir.clone(),
        seed: spec.seed,
        stages: Vec::new(),
        artifacts: Vec::new(),
    };
    files::write_json(&spec.out_dir.join("run_spec.json"), &spec).map_err(|e| RunError::Output(format!("{e:#}")))?;
    run.artifacts.push(spec.out_dir.join("run_spec.json"));

    let t = Instant::now();
    let r = match &spec.datagen {
        Some(p) => datagen(p, &spec.scenario_dir),
        None if !spec.scenario_dir.is_dir() => Err(anyhow::anyhow!(
            "scenario directory {} does not exist and no datagen parameters were given",
            spec.scenario_dir.display()
        )),
        None => ScenarioBundle::read(&spec.scenario_dir)
            .map(|_| Vec::new())
            .with_context(|| format!("no scenario in {}", spec.scenario_dir.display())),
    };
    run.finish("datagen", t, r)?;

    if spec.train {
        let t = Instant::now();
        let r = train(&spec.scenario_dir, &spec.train_config).map(|(_, p)| vec![p]);
        run.finish("train", t, r)?;
    }

    let t = Instant::now();
    let r = (|| {
        let bundle = ScenarioBundle::read(&spec.scenario_dir)?;
        let seed = spec.seed.unwrap_or(bundle.meta.seed);
        let samples = optimize_samples(
            &bundle,
            seed,
            spec.optimize_samples,
            &spec.microservices.ga,
            &spec.microservices.carbon,
        );
        let mut out = Vec::new();
        for (i, s) in samples.iter().enumerate() {
            let p = spec.out_dir.join("optimize").join(format!("trace-{i}.json"));
            files::write_json(&p, s)?;
            out.push(p);
        }
        Ok(out)
    })();
    run.finish("optimize", t, r)?;

    let t = Instant::now();
    let ctx = crate::workload_context(&spec.scenario_dir);
    let ctx = match ctx {
        Ok(c) => {
            run.finish("workload", t, Ok(Vec::new()))?;
            c
        }
        Err(e) => return Err(run.finish("workload", t, Err(e)).unwrap_err()),
    };
    let spawner = Spawner::Process {
        exe: exe.to_path_buf(),
        scenario_dir: spec.scenario_dir.clone(),
    };
    let mono = bench_mode(&mut run, &spec, &spec.monolith, &spawner, ctx.clone()).await?;
    let micro = bench_mode(&mut run, &spec, &spec.microservices, &spawner, ctx).await?;

    let t = Instant::now();
    let r = (|| {
        let c = compare_reports(&mono, &micro);
        if c.profile_mismatch {
            tracing::warn!("reports were produced with different load profiles");
        }
        let mut out = Vec::new();
        for (format, ext) in [(Format::Json, "json"), (Format::Csv, "csv"), (Format::Markdown, "md")] {
            let p = spec.out_dir.join(format!("comparison.{ext}"));
            files::write_bytes(&p, render_report(&c, format).as_bytes())?;
            out.push(p);
        }
        Ok(out)
    })();
    run.finish("compare", t, r)?;
    run.write_manifest()
}
