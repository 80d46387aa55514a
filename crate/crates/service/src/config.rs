//! Deployment description shared by every process of a deployment.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use resa_core::optimizer::GaConfig;
use resa_core::recommend::ContentWeights;
use resa_core::sustainability::CarbonConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Monolith,
    Microservices,
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mono" | "monolith" => Ok(Mode::Monolith),
            "micro" | "microservices" => Ok(Mode::Microservices),
            _ => Err(format!("unknown mode {s:?} (mono|micro)")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Monolith => "monolith",
            Mode::Microservices => "microservices",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Monolith,
    Gateway,
    Search,
    Quote,
    Recommend,
    Optimize,
    Booking,
    Inventory,
    Profile,
}

impl Role {
    pub const STATELESS: [Role; 4] = [Role::Search, Role::Quote, Role::Recommend, Role::Optimize];
    pub const STATEFUL: [Role; 3] = [Role::Inventory, Role::Booking, Role::Profile];

    pub fn name(self) -> &'static str {
        match self {
            Role::Monolith => "monolith",
            Role::Gateway => "gateway",
            Role::Search => "search",
            Role::Quote => "quote",
            Role::Recommend => "recommend",
            Role::Optimize => "optimize",
            Role::Booking => "booking",
            Role::Inventory => "inventory",
            Role::Profile => "profile",
        }
    }

    /// Service owning a public path, by its first segment.
    pub fn for_path(path: &str) -> Option<Role> {
        let first = path.trim_start_matches('/').split(['/', '?']).next()?;
        Some(match first {
            "search" => Role::Search,
            "quote" => Role::Quote,
            "recommend" => Role::Recommend,
            "optimize" => Role::Optimize,
            "bookings" => Role::Booking,
            "inventory" => Role::Inventory,
            "profiles" => Role::Profile,
            _ => return None,
        })
    }
}

impl FromStr for Role {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        [
            Role::Monolith,
            Role::Gateway,
            Role::Search,
            Role::Quote,
            Role::Recommend,
            Role::Optimize,
            Role::Booking,
            Role::Inventory,
            Role::Profile,
        ]
        .into_iter()
        .find(|r| r.name() == s)
        .ok_or_else(|| format!("unknown role {s:?}"))
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Synthetic service time of one endpoint: a sleep plus optional busy-work.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkCost {
    pub delay_ms: f64,
    pub busy_us: u64,
}

impl WorkCost {
    pub const fn delay(ms: f64) -> Self {
        WorkCost { delay_ms: ms, busy_us: 0 }
    }
}

/// Per-endpoint synthetic cost; optimize additionally pays its real GA time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkModel {
    pub search: WorkCost,
    pub quote: WorkCost,
    pub recommend: WorkCost,
    pub optimize: WorkCost,
    pub booking: WorkCost,
    pub inventory: WorkCost,
    pub profile: WorkCost,
}

impl Default for WorkModel {
    fn default() -> Self {
        WorkModel {
            search: WorkCost::delay(20.0),
            quote: WorkCost::delay(10.0),
            recommend: WorkCost::delay(15.0),
            optimize: WorkCost::default(),
            booking: WorkCost::delay(10.0),
            inventory: WorkCost::default(),
            profile: WorkCost::default(),
        }
    }
}

impl WorkModel {
    pub fn zero() -> Self {
        WorkModel {
            search: WorkCost::default(),
            quote: WorkCost::default(),
            recommend: WorkCost::default(),
            optimize: WorkCost::default(),
            booking: WorkCost::default(),
            inventory: WorkCost::default(),
            profile: WorkCost::default(),
        }
    }

    pub fn cost(&self, role: Role) -> WorkCost {
        match role {
            Role::Search => self.search,
            Role::Quote => self.quote,
            Role::Recommend => self.recommend,
            Role::Optimize => self.optimize,
            Role::Booking => self.booking,
            Role::Inventory => self.inventory,
            Role::Profile => self.profile,
            Role::Monolith | Role::Gateway => WorkCost::default(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for r in Role::STATELESS.iter().chain(&Role::STATEFUL) {
            let c = self.cost(*r);
            if !c.delay_ms.is_finite() || c.delay_ms < 0.0 {
                return Err(format!("work cost for {r} must be non-negative"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeploymentSpec {
    pub mode: Mode,
    pub bind_host: String,
    /// Port of the public entry point (monolith or gateway); 0 picks a free one.
    pub gateway_port: u16,
    /// Fixed ports per service; unlisted services use ephemeral ports.
    pub ports: BTreeMap<Role, u16>,
    /// Replica count of each stateless service (microservices only).
    pub replicas: BTreeMap<Role, usize>,
    /// Concurrent handler executions per process.
    pub worker_pool_size: usize,
    /// Requests allowed to wait for a worker before 503.
    pub max_queue: usize,
    /// Per-key locking in stateful services; false puts each behind one lock.
    pub sharded_datastore: bool,
    pub work: WorkModel,
    pub hold_ttl_ms: u64,
    /// Payments above this amount are declined by the mock processor.
    pub payment_decline_threshold: f64,
    pub auth_token: String,
    pub downstream_timeout_ms: u64,
    pub bus_queue_depth: usize,
    pub bus_send_timeout_ms: u64,
    pub event_poll_ms: u64,
    pub shutdown_grace_ms: u64,
    pub recommend_lambda: f64,
    pub recommend_neighbors: usize,
    pub content_weights: ContentWeights,
    pub ga: GaConfig,
    pub carbon: CarbonConfig,
}

impl Default for DeploymentSpec {
    fn default() -> Self {
        DeploymentSpec {
            mode: Mode::Monolith,
            bind_host: "127.0.0.1".into(),
            gateway_port: 0,
            ports: BTreeMap::new(),
            replicas: Role::STATELESS.iter().map(|r| (*r, 2)).collect(),
            worker_pool_size: 64,
            max_queue: 512,
            sharded_datastore: true,
            work: WorkModel::default(),
            hold_ttl_ms: 30_000,
            payment_decline_threshold: 10_000.0,
            auth_token: "resa-dev-token".into(),
            downstream_timeout_ms: 5_000,
            bus_queue_depth: 1024,
            bus_send_timeout_ms: 1_000,
            event_poll_ms: 50,
            shutdown_grace_ms: 5_000,
            recommend_lambda: 0.5,
            recommend_neighbors: 10,
            content_weights: ContentWeights::default(),
            ga: GaConfig::default(),
            carbon: CarbonConfig::default(),
        }
    }
}

impl DeploymentSpec {
    pub fn new(mode: Mode) -> Self {
        DeploymentSpec {
            mode,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.worker_pool_size == 0 {
            return Err("worker_pool_size must be >= 1".into());
        }
        for (r, n) in &self.replicas {
            if !Role::STATELESS.contains(r) {
                return Err(format!("only stateless services are replicated, got {r}"));
            }
            if *n == 0 {
                return Err(format!("replicas of {r} must be >= 1"));
            }
        }
        if !(0.0..=1.0).contains(&self.recommend_lambda) {
            return Err("recommend_lambda must lie in [0, 1]".into());
        }
        if self.bus_queue_depth == 0 {
            return Err("bus_queue_depth must be >= 1".into());
        }
        self.work.validate()?;
        self.carbon.validate()?;
        self.ga.validate().map_err(|e| e.to_string())
    }

    pub fn replicas_of(&self, role: Role) -> usize {
        if Role::STATELESS.contains(&role) {
            self.replicas.get(&role).copied().unwrap_or(1)
        } else {
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_roundtrip() {
        let s = DeploymentSpec::new(Mode::Microservices);
        s.validate().unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: DeploymentSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        let partial: DeploymentSpec = serde_json::from_str(r#"{"mode":"microservices","worker_pool_size":4}"#).unwrap();
        assert_eq!(partial.worker_pool_size, 4);
        assert_eq!(partial.replicas_of(Role::Search), 2);
        assert_eq!(partial.replicas_of(Role::Booking), 1);
        assert_eq!(partial.work.search.delay_ms, 20.0);
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = DeploymentSpec::default();
        s.replicas.insert(Role::Booking, 2);
        assert!(s.validate().is_err());
        let mut s = DeploymentSpec::default();
        s.work.search.delay_ms = -1.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn path_routing_table() {
        assert_eq!(Role::for_path("/search?origin=A"), Some(Role::Search));
        assert_eq!(Role::for_path("/bookings/bk-1/pay"), Some(Role::Booking));
        assert_eq!(Role::for_path("/inventory/x"), Some(Role::Inventory));
        assert_eq!(Role::for_path("/nope"), None);
        assert_eq!(Role::for_path("/internal/events"), None);
        assert_eq!("booking".parse::<Role>().unwrap(), Role::Booking);
        assert_eq!("mono".parse::<Mode>().unwrap(), Mode::Monolith);
    }
}
