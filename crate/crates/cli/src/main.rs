use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context as _};
use clap::{Args, Parser, Subcommand};
use resa_bench::{compare_reports, ramp_to_failure, render_report, run_load, BenchReport, Comparison, Format, LoadProfile, Target, Thresholds};
use resa_cli::files::{read_json, write_bytes, write_json};
use resa_cli::pipeline::{self, ScenarioRunSpec};
use resa_cli::workload_context;
use resa_core::forecast::TrainConfig;
use resa_core::optimizer::{evolve, GaConfig};
use resa_core::sustainability::CarbonConfig;
use resa_core::synthgen::{ScenarioBundle, ScenarioParams};
use resa_core::TripRequest;
use resa_service::{DeploymentSpec, Mode, Peers, Role, ServiceArgs, Spawner};
use tracing_subscriber::EnvFilter;

/// Travel reservation testbed: data generation, forecasting, itinerary
/// optimization, monolith and microservices deployments, and benchmarks.
///
/// Logs go to stderr; verbosity is set with RESA_LOG (e.g. RESA_LOG=debug).
#[derive(Parser)]
#[command(name = "resa", version)]
struct Cli {
    /// Seed for every random choice the command makes; recorded in its outputs.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic scenario (catalog, users, history) into a directory.
    Datagen(DatagenArgs),
    /// Fit the price and demand models of a scenario; writes models.json into it.
    Train(TrainArgs),
    /// Run the genetic itinerary optimizer on one trip request.
    Optimize(OptimizeArgs),
    /// Start a deployment and serve until interrupted.
    Serve(ServeArgs),
    /// One deployment process (started by `serve`, not meant for direct use).
    #[command(hide = true)]
    Service(ServiceCmd),
    /// Closed-loop load against a running deployment.
    Bench(BenchArgs),
    /// Load at increasing concurrency until the failure thresholds are crossed.
    Ramp(RampArgs),
    /// Side-by-side comparison of two bench reports.
    Compare(CompareArgs),
    /// Full scenario: datagen, train, serve and bench both modes, compare.
    Run(RunArgs),
    /// Render a comparison as csv, json or markdown.
    Report(ReportArgs),
}

#[derive(Args)]
struct DatagenArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Generation parameters (JSON); unset fields take their defaults.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    cities: Option<usize>,
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    history_days: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Training configuration (JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Trip request (JSON); a request is sampled from the scenario when omitted.
    #[arg(long)]
    request: Option<PathBuf>,
    /// GA configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Result and per-generation trace (JSON); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    /// mono or micro.
    #[arg(long)]
    mode: Mode,
    #[arg(long)]
    scenario: PathBuf,
    /// Deployment configuration (JSON); its mode is overridden by --mode.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Port of the public entry point (overrides the configuration).
    #[arg(long)]
    port: Option<u16>,
}

#[derive(Args)]
struct ServiceCmd {
    #[arg(long)]
    role: Role,
    #[arg(long)]
    listen: String,
    #[arg(long)]
    spec_json: String,
    #[arg(long, default_value = "{}")]
    peers_json: String,
    #[arg(long)]
    scenario: Option<PathBuf>,
}

#[derive(Args)]
struct TargetArgs {
    /// Base URL of the deployment's entry point.
    #[arg(long)]
    target: String,
    /// Bearer token; RESA_TOKEN, else the default development token.
    #[arg(long, env = "RESA_TOKEN", default_value = "resa-dev-token")]
    token: String,
    /// Scenario the deployment serves; requests are planned from it.
    #[arg(long)]
    scenario: PathBuf,
    /// Load profile (JSON); unset fields take their defaults.
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long)]
    concurrency: Option<usize>,
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    warmup: Option<f64>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    target: TargetArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RampArgs {
    #[command(flatten)]
    target: TargetArgs,
    #[arg(long, default_value_t = 50)]
    start: usize,
    #[arg(long, default_value_t = 50)]
    step: usize,
    #[arg(long, default_value_t = 2000)]
    max: usize,
    /// Failure when the error rate exceeds this fraction.
    #[arg(long, default_value_t = 0.01)]
    max_error_rate: f64,
    /// Failure when p99 latency exceeds this many milliseconds.
    #[arg(long, default_value_t = 5000.0)]
    max_p99_ms: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Baseline report.
    baseline: PathBuf,
    /// Candidate report.
    candidate: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    markdown: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Run specification (JSON); relative paths in it are taken from its directory.
    spec: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Comparison (JSON) as written by `compare --json` or `run`.
    comparison: PathBuf,
    #[arg(long, default_value = "markdown")]
    format: Format,
    /// Destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let filter = EnvFilter::try_from_env("RESA_LOG").unwrap_or_else(|_| EnvFilter::new("info"));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn runtime() -> anyhow::Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

fn or_default<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> anyhow::Result<T> {
    path.map(read_json).transpose().map(Option::unwrap_or_default)
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    let seed = cli.seed;
    match cli.cmd {
        Cmd::Datagen(a) => datagen(a, seed),
        Cmd::Train(a) => train(a),
        Cmd::Optimize(a) => optimize(a, seed),
        Cmd::Serve(a) => serve(a),
        Cmd::Service(a) => service(a),
        Cmd::Bench(a) => bench(a, seed),
        Cmd::Ramp(a) => ramp(a, seed),
        Cmd::Compare(a) => compare(a),
        Cmd::Run(a) => run(a, seed),
        Cmd::Report(a) => report(a),
    }
}

fn datagen(a: DatagenArgs, seed: Option<u64>) -> anyhow::Result<()> {
    let mut p: ScenarioParams = or_default(a.params.as_deref())?;
    if let Some(s) = seed {
        p.seed = s;
    }
    if let Some(n) = a.cities {
        p.n_cities = n;
    }
    if let Some(n) = a.users {
        p.n_users = n;
    }
    if let Some(n) = a.history_days {
        p.n_history_days = n;
    }
    let files = pipeline::datagen(&p, &a.out)?;
    tracing::info!(seed = p.seed, dir = %a.out.display(), files = files.len(), "scenario written");
    Ok(())
}

fn train(a: TrainArgs) -> anyhow::Result<()> {
    let config: TrainConfig = or_default(a.config.as_deref())?;
    let (models, path) = pipeline::train(&a.scenario, &config)?;
    for (kind, m) in &models.regressions {
        tracing::info!(?kind, training_rmse = m.training_rmse, "regression");
    }
    tracing::info!(path = %path.display(), "models written");
    Ok(())
}

fn optimize(a: OptimizeArgs, seed: Option<u64>) -> anyhow::Result<()> {
    let bundle = ScenarioBundle::read(&a.scenario)?;
    let mut ga: GaConfig = or_default(a.config.as_deref())?;
    if let Some(s) = seed {
        ga.seed = s;
    }
    let carbon = CarbonConfig::default();
    let sample = match a.request {
        Some(p) => {
            let request: TripRequest = read_json(&p)?;
            let (optimum, trace) = evolve(&bundle.catalog, &request, &ga, &carbon)?;
            pipeline::OptimizeSample {
                seed: ga.seed,
                request,
                ga,
                optimum: Some(optimum),
                trace: Some(trace),
                error: None,
            }
        }
        None => {
            let s = pipeline::optimize_samples(&bundle, ga.seed, 1, &ga, &carbon).remove(0);
            if let Some(e) = &s.error {
                bail!("sampled request has no solution: {e}");
            }
            s
        }
    };
    match a.out {
        Some(p) => write_json(&p, &sample),
        None => {
            let mut out = std::io::stdout().lock();
            serde_json::to_writer_pretty(&mut out, &sample)?;
            writeln!(out)?;
            Ok(())
        }
    }
}

fn serve(a: ServeArgs) -> anyhow::Result<()> {
    let mut spec: DeploymentSpec = or_default(a.config.as_deref())?;
    spec.mode = a.mode;
    if let Some(p) = a.port {
        spec.gateway_port = p;
    }
    if !a.scenario.is_dir() {
        bail!("scenario directory {} does not exist", a.scenario.display());
    }
    let spawner = Spawner::Process {
        exe: std::env::current_exe()?,
        scenario_dir: a.scenario.canonicalize()?,
    };
    let rt = runtime()?;
    rt.block_on(async {
        let d = pipeline::start_deployment(spec, spawner).await?;
        tracing::info!(mode = %d.mode, url = d.url(), processes = d.processes().len(), "deployment up");
        println!("{}", d.url());
        shutdown_signal().await;
        tracing::info!("stopping");
        pipeline::stop_deployment(d).await;
        Ok(())
    })
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        let mut term = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()).expect("signal handler");
        tokio::select! {
            _ = tokio::signal::ctrl_c() => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    let _ = tokio::signal::ctrl_c().await;
}

fn service(a: ServiceCmd) -> anyhow::Result<()> {
    let spec: DeploymentSpec = serde_json::from_str(&a.spec_json).context("--spec-json")?;
    let peers: Peers = serde_json::from_str(&a.peers_json).context("--peers-json")?;
    let args = ServiceArgs {
        role: a.role,
        scenario: a.scenario,
        spec,
        peers,
        listen: a.listen,
    };
    runtime()?
        .block_on(resa_service::run_service_process(args))
        .map_err(anyhow::Error::msg)
}

fn load_profile(t: &TargetArgs, seed: Option<u64>) -> anyhow::Result<LoadProfile> {
    let mut p: LoadProfile = or_default(t.profile.as_deref())?;
    if let Some(s) = seed {
        p.seed = s;
    }
    if let Some(c) = t.concurrency {
        p.concurrency = c;
    }
    if let Some(d) = t.duration {
        p.duration_s = d;
    }
    if let Some(w) = t.warmup {
        p.warmup_s = w;
    }
    Ok(p)
}

fn target_of(t: &TargetArgs) -> Target {
    Target {
        url: t.target.trim_end_matches('/').to_owned(),
        token: (!t.token.is_empty()).then(|| t.token.clone()),
    }
}

fn bench(a: BenchArgs, seed: Option<u64>) -> anyhow::Result<()> {
    let profile = load_profile(&a.target, seed)?;
    let ctx = workload_context(&a.target.scenario)?;
    let target = target_of(&a.target);
    let report = runtime()?.block_on(run_load(&target, ctx, &profile))?;
    tracing::info!(
        throughput = report.throughput,
        mean_ms = report.latency.mean_ms,
        p99_ms = report.latency.p99_ms,
        error_rate = report.error_rate,
        "bench done"
    );
    write_json(&a.out, &report)
}

fn ramp(a: RampArgs, seed: Option<u64>) -> anyhow::Result<()> {
    let profile = load_profile(&a.target, seed)?;
    let ctx = workload_context(&a.target.scenario)?;
    let target = target_of(&a.target);
    let thresholds = Thresholds {
        max_error_rate: a.max_error_rate,
        max_p99_ms: a.max_p99_ms,
    };
    let r = runtime()?.block_on(ramp_to_failure(&target, ctx, a.start, a.step, a.max, &profile, thresholds))?;
    match r.failure_point {
        Some(c) => tracing::info!(failure_point = c, "ramp done"),
        None => tracing::info!(max = a.max, "ramp done; no failure up to max"),
    }
    write_json(&a.out, &r)
}

fn compare(a: CompareArgs) -> anyhow::Result<()> {
    let base: BenchReport = read_json(&a.baseline)?;
    let cand: BenchReport = read_json(&a.candidate)?;
    let c = compare_reports(&base, &cand);
    if c.profile_mismatch {
        tracing::warn!("reports were produced with different load profiles");
    }
    eprint!("{}", render_report(&c, Format::Markdown));
    for (path, format) in [(&a.csv, Format::Csv), (&a.json, Format::Json), (&a.markdown, Format::Markdown)] {
        if let Some(p) = path {
            write_bytes(p, render_report(&c, format).as_bytes())?;
        }
    }
    Ok(())
}

fn run(a: RunArgs, seed: Option<u64>) -> anyhow::Result<()> {
    let mut spec: ScenarioRunSpec = read_json(&a.spec)?;
    if seed.is_some() {
        spec.seed = seed;
    }
    let base = a.spec.parent().map(Path::to_path_buf).unwrap_or_default();
    let base = if base.as_os_str().is_empty() { PathBuf::from(".") } else { base };
    let exe = std::env::current_exe()?;
    let m = runtime()?.block_on(pipeline::run_scenario(&spec, &base.canonicalize()?, &exe))?;
    tracing::info!(artifacts = m.artifacts.len(), "run complete");
    Ok(())
}

fn report(a: ReportArgs) -> anyhow::Result<()> {
    let c: Comparison = read_json(&a.comparison)?;
    let doc = render_report(&c, a.format);
    match a.out {
        Some(p) => write_bytes(&p, doc.as_bytes()),
        None => {
            print!("{doc}");
            Ok(())
        }
    }
}
