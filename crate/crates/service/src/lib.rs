//! Reservation service runtime: both deployments (one monolith process, or a
//! gateway in front of per-service processes) built from the same handlers.

pub mod app;
pub mod booking;
pub mod bus;
pub mod config;
pub mod data;
pub mod error;
pub mod gateway;
pub mod handlers;
pub mod inventory;
pub mod launcher;
pub mod profile;
pub mod runtime;

use std::future::Future;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use tokio::io::AsyncReadExt;
use tokio::net::TcpListener;

pub use app::{AppState, Peers};
pub use config::{DeploymentSpec, Mode, Role, WorkCost, WorkModel};
pub use data::Scenario;
pub use launcher::{Deployment, LaunchError, Spawner};

/// Line a service process prints on stdout once its socket is bound.
pub const LISTENING_PREFIX: &str = "LISTENING ";

/// Serves until `shutdown` resolves, then drains in-flight requests for at
/// most `grace` before dropping the rest.
pub async fn serve_until(
    listener: TcpListener,
    router: axum::Router,
    shutdown: impl Future<Output = ()>,
    grace: Duration,
) -> std::io::Result<()> {
    let stop = Arc::new(tokio::sync::Notify::new());
    let signal = stop.clone();
    let mut server = tokio::spawn(async move {
        axum::serve(listener, router)
            .with_graceful_shutdown(async move { signal.notified().await })
            .await
    });
    tokio::select! {
        r = &mut server => return r.unwrap_or_else(|e| Err(std::io::Error::other(e))),
        _ = shutdown => {}
    }
    stop.notify_one();
    match tokio::time::timeout(grace, &mut server).await {
        Ok(r) => r.unwrap_or_else(|e| Err(std::io::Error::other(e))),
        Err(_) => {
            tracing::warn!("drain deadline passed; dropping remaining connections");
            server.abort();
            Ok(())
        }
    }
}

#[derive(Debug, Clone)]
pub struct ServiceArgs {
    pub role: Role,
    pub scenario: Option<PathBuf>,
    pub spec: DeploymentSpec,
    pub peers: Peers,
    pub listen: String,
}

/// Entry point of one deployment process. Prints the bound address, then
/// serves until stdin closes (the launcher's stop signal) or Ctrl-C.
pub async fn run_service_process(args: ServiceArgs) -> Result<(), String> {
    let scenario = match &args.scenario {
        Some(dir) if args.role != Role::Gateway => {
            let dir = dir.clone();
            let s = tokio::task::spawn_blocking(move || Scenario::load(&dir))
                .await
                .map_err(|e| e.to_string())?
                .map_err(|e| e.to_string())?;
            Some(Arc::new(s))
        }
        _ => None,
    };
    let grace = Duration::from_millis(args.spec.shutdown_grace_ms);
    let state = AppState::build(args.role, args.spec, scenario, args.peers).await?;
    let listener = TcpListener::bind(&args.listen)
        .await
        .map_err(|e| format!("cannot bind {}: {e}", args.listen))?;
    let addr = listener.local_addr().map_err(|e| e.to_string())?;
    {
        let mut out = std::io::stdout().lock();
        writeln!(out, "{LISTENING_PREFIX}{addr}").map_err(|e| e.to_string())?;
        out.flush().map_err(|e| e.to_string())?;
    }
    tracing::info!(role = %state.role, %addr, "listening");
    let shutdown = async {
        let stdin_closed = async {
            let mut buf = [0u8; 64];
            let mut stdin = tokio::io::stdin();
            while matches!(stdin.read(&mut buf).await, Ok(n) if n > 0) {}
        };
        tokio::select! {
            _ = stdin_closed => {}
            _ = tokio::signal::ctrl_c() => {}
        }
    };
    serve_until(listener, app::router(state), shutdown, grace)
        .await
        .map_err(|e| e.to_string())
}
