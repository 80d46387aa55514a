//! Starts and stops a whole deployment, as child processes or as in-process
//! instances (one thread and runtime each).
//!
//! Microservices start in dependency order: inventory, booking, profile, the
//! stateless replicas, then the gateway, which learns every address. Children
//! stop when their stdin closes, so a dying launcher leaves no orphans.

use std::io::{BufRead, BufReader};
use std::path::PathBuf;
use std::process::{Child, Command, Stdio};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use tokio::net::TcpListener;

use crate::app::{router, AppState, Peers};
use crate::config::{DeploymentSpec, Mode, Role};
use crate::data::Scenario;
use crate::{serve_until, LISTENING_PREFIX};

#[derive(Debug, thiserror::Error)]
pub enum LaunchError {
    #[error("invalid deployment spec: {0}")]
    Spec(String),
    #[error("{instance} failed to start: {msg}")]
    Start { instance: String, msg: String },
}

#[derive(Debug, Clone)]
pub enum Spawner {
    /// Runs `exe service ...` per instance; the scenario is read from `scenario_dir`.
    Process { exe: PathBuf, scenario_dir: PathBuf },
    InProcess { scenario: Arc<Scenario>, worker_threads: usize },
}

enum Handle {
    Child(Child),
    Thread {
        stop: Option<tokio::sync::oneshot::Sender<()>>,
        thread: Option<JoinHandle<()>>,
    },
}

struct Instance {
    name: String,
    role: Role,
    url: String,
    pid: u32,
    handle: Handle,
}

pub struct Deployment {
    pub mode: Mode,
    url: String,
    instances: Vec<Instance>,
    grace: Duration,
}

fn start_error(instance: &str, msg: impl Into<String>) -> LaunchError {
    LaunchError::Start {
        instance: instance.to_owned(),
        msg: msg.into(),
    }
}

fn listen_addr(spec: &DeploymentSpec, role: Role) -> String {
    let port = if matches!(role, Role::Monolith | Role::Gateway) {
        spec.gateway_port
    } else {
        spec.ports.get(&role).copied().unwrap_or(0)
    };
    format!("{}:{}", spec.bind_host, port)
}

fn spawn_instance(spawner: &Spawner, name: &str, role: Role, spec: &DeploymentSpec, peers: Peers, listen: String) -> Result<Instance, LaunchError> {
    match spawner {
        Spawner::Process { exe, scenario_dir } => {
            let mut cmd = Command::new(exe);
            cmd.arg("service")
                .arg("--role")
                .arg(role.name())
                .arg("--listen")
                .arg(&listen)
                .arg("--spec-json")
                .arg(serde_json::to_string(spec).expect("serializable"))
                .arg("--peers-json")
                .arg(serde_json::to_string(&peers).expect("serializable"));
            if role != Role::Gateway {
                cmd.arg("--scenario").arg(scenario_dir);
            }
            let mut child = cmd
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .stderr(Stdio::inherit())
                .spawn()
                .map_err(|e| start_error(name, format!("cannot run {}: {e}", exe.display())))?;
            let stdout = child.stdout.take().expect("piped");
            let mut line = String::new();
            let read = BufReader::new(stdout).read_line(&mut line);
            let addr = match (read, line.trim().strip_prefix(LISTENING_PREFIX)) {
                (Ok(_), Some(a)) => a.to_owned(),
                _ => {
                    let _ = child.kill();
                    let status = child.wait().map(|s| s.to_string()).unwrap_or_default();
                    return Err(start_error(name, format!("exited before listening ({status})")));
                }
            };
            Ok(Instance {
                name: name.to_owned(),
                role,
                url: format!("http://{addr}"),
                pid: child.id(),
                handle: Handle::Child(child),
            })
        }
        Spawner::InProcess { scenario, worker_threads } => {
            let scenario = (role != Role::Gateway).then(|| scenario.clone());
            let spec = spec.clone();
            let grace = Duration::from_millis(spec.shutdown_grace_ms);
            let (ready_tx, ready_rx) = std::sync::mpsc::channel::<Result<String, String>>();
            let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
            let workers = (*worker_threads).max(1);
            let thread = std::thread::Builder::new()
                .name(format!("resa-{name}"))
                .spawn(move || {
                    let rt = match tokio::runtime::Builder::new_multi_thread()
                        .worker_threads(workers)
                        .enable_all()
                        .build()
                    {
                        Ok(rt) => rt,
                        Err(e) => {
                            let _ = ready_tx.send(Err(e.to_string()));
                            return;
                        }
                    };
                    rt.block_on(async move {
                        let state = match AppState::build(role, spec, scenario, peers).await {
                            Ok(s) => s,
                            Err(e) => {
                                let _ = ready_tx.send(Err(e));
                                return;
                            }
                        };
                        let listener = match TcpListener::bind(&listen).await {
                            Ok(l) => l,
                            Err(e) => {
                                let _ = ready_tx.send(Err(format!("cannot bind {listen}: {e}")));
                                return;
                            }
                        };
                        let addr = listener.local_addr().map(|a| a.to_string()).unwrap_or_default();
                        let _ = ready_tx.send(Ok(addr));
                        let stop = async {
                            let _ = stop_rx.await;
                        };
                        if let Err(e) = serve_until(listener, router(state), stop, grace).await {
                            tracing::error!(error = %e, "server failed");
                        }
                    });
                })
                .map_err(|e| start_error(name, e.to_string()))?;
            let addr = ready_rx
                .recv()
                .map_err(|_| start_error(name, "instance thread exited"))?
                .map_err(|e| start_error(name, e))?;
            Ok(Instance {
                name: name.to_owned(),
                role,
                url: format!("http://{addr}"),
                pid: std::process::id(),
                handle: Handle::Thread {
                    stop: Some(stop_tx),
                    thread: Some(thread),
                },
            })
        }
    }
}

impl Deployment {
    pub fn start(spec: &DeploymentSpec, spawner: &Spawner) -> Result<Deployment, LaunchError> {
        spec.validate().map_err(LaunchError::Spec)?;
        let grace = Duration::from_millis(spec.shutdown_grace_ms);
        let mut d = Deployment {
            mode: spec.mode,
            url: String::new(),
            instances: Vec::new(),
            grace,
        };
        match spec.mode {
            Mode::Monolith => {
                let i = spawn_instance(spawner, "monolith", Role::Monolith, spec, Peers::default(), listen_addr(spec, Role::Monolith))?;
                d.url = i.url.clone();
                d.instances.push(i);
            }
            Mode::Microservices => {
                let mut order: Vec<(String, Role)> = vec![
                    ("inventory".into(), Role::Inventory),
                    ("booking".into(), Role::Booking),
                    ("profile".into(), Role::Profile),
                ];
                for r in Role::STATELESS {
                    for k in 0..spec.replicas_of(r) {
                        order.push((format!("{}-{k}", r.name()), r));
                    }
                }
                for (name, role) in order {
                    let peers = d.peers();
                    let listen = if spec.replicas_of(role) > 1 {
                        format!("{}:0", spec.bind_host)
                    } else {
                        listen_addr(spec, role)
                    };
                    let i = spawn_instance(spawner, &name, role, spec, peers, listen)?;
                    d.instances.push(i);
                }
                let gw = spawn_instance(spawner, "gateway", Role::Gateway, spec, d.peers(), listen_addr(spec, Role::Gateway))?;
                d.url = gw.url.clone();
                d.instances.push(gw);
            }
        }
        Ok(d)
    }

    fn peers(&self) -> Peers {
        let mut p = Peers::default();
        for i in &self.instances {
            p.urls.entry(i.role).or_default().push(i.url.clone());
            p.processes.push((i.name.clone(), i.pid));
        }
        p
    }

    /// Public entry point (monolith or gateway).
    pub fn url(&self) -> &str {
        &self.url
    }

    /// (instance name, pid) of every instance, entry point last.
    pub fn processes(&self) -> Vec<(String, u32)> {
        self.instances.iter().map(|i| (i.name.clone(), i.pid)).collect()
    }

    pub fn urls(&self, role: Role) -> Vec<String> {
        self.instances
            .iter()
            .filter(|i| i.role == role)
            .map(|i| i.url.clone())
            .collect()
    }

    /// Stops in reverse start order, draining each instance.
    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        while let Some(mut i) = self.instances.pop() {
            match &mut i.handle {
                Handle::Child(c) => {
                    drop(c.stdin.take());
                    let deadline = Instant::now() + self.grace + Duration::from_secs(1);
                    loop {
                        match c.try_wait() {
                            Ok(Some(_)) => break,
                            Ok(None) if Instant::now() < deadline => std::thread::sleep(Duration::from_millis(10)),
                            _ => {
                                let _ = c.kill();
                                let _ = c.wait();
                                break;
                            }
                        }
                    }
                }
                Handle::Thread { stop, thread } => {
                    if let Some(s) = stop.take() {
                        let _ = s.send(());
                    }
                    if let Some(t) = thread.take() {
                        let _ = t.join();
                    }
                }
            }
            tracing::debug!(instance = %i.name, "stopped");
        }
    }
}

impl Drop for Deployment {
    fn drop(&mut self) {
        self.shutdown();
    }
}
