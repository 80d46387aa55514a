//! Seeded request plans. Virtual user `u` draws from its own stream
//! (`seed`, 1000 + u), so the sequence each user issues depends only on the
//! seed and the scenario, never on timing.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng as _;
use resa_client::{search_path, Method};
use resa_core::model::MINUTES_PER_DAY;
use resa_core::rng::{seeded, Rng};
use resa_core::synthgen::sample_trip_request;
use resa_core::wire::{BookingRequest, OptimizeRequest, QuoteRequest, RecommendRequest};
use resa_core::{Catalog, Itinerary, OptionId, UserProfile};
use serde::{Deserialize, Serialize};

/// Stream offset of virtual-user generators.
pub const USER_STREAM_BASE: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endpoint {
    Search,
    Quote,
    Recommend,
    Optimize,
    Booking,
}

impl Endpoint {
    pub const ALL: [Endpoint; 5] = [
        Endpoint::Search,
        Endpoint::Quote,
        Endpoint::Recommend,
        Endpoint::Optimize,
        Endpoint::Booking,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Endpoint::Search => "search",
            Endpoint::Quote => "quote",
            Endpoint::Recommend => "recommend",
            Endpoint::Optimize => "optimize",
            Endpoint::Booking => "booking",
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Endpoint {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Endpoint::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown endpoint {s:?}"))
    }
}

/// Percent weights of each endpoint; they must sum to 100.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Mix {
    pub search: u32,
    pub quote: u32,
    pub recommend: u32,
    pub optimize: u32,
    pub booking: u32,
}

impl Default for Mix {
    fn default() -> Self {
        Mix {
            search: 50,
            quote: 20,
            recommend: 15,
            optimize: 5,
            booking: 10,
        }
    }
}

impl Mix {
    pub fn weight(&self, e: Endpoint) -> u32 {
        match e {
            Endpoint::Search => self.search,
            Endpoint::Quote => self.quote,
            Endpoint::Recommend => self.recommend,
            Endpoint::Optimize => self.optimize,
            Endpoint::Booking => self.booking,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let total: u32 = Endpoint::ALL.iter().map(|e| self.weight(*e)).sum();
        if total != 100 {
            return Err(format!("mix weights must sum to 100, got {total}"));
        }
        Ok(())
    }

    /// Endpoint for a uniform draw in `0..100`.
    pub fn pick(&self, draw: u32) -> Endpoint {
        let mut acc = 0;
        for e in Endpoint::ALL {
            acc += self.weight(e);
            if draw < acc {
                return e;
            }
        }
        Endpoint::Booking
    }
}

/// What the planner needs to know about the scenario under test.
#[derive(Debug, Clone)]
pub struct WorkloadContext {
    catalog: Arc<Catalog>,
    cities: Vec<String>,
    transport: Vec<OptionId>,
    users: Vec<String>,
    horizon_days: u32,
}

impl WorkloadContext {
    pub fn new(catalog: Catalog, users: &[UserProfile], horizon_days: u32) -> Result<Self, String> {
        let cities: Vec<String> = catalog.cities().iter().cloned().collect();
        let mut transport: Vec<OptionId> = catalog
            .options()
            .iter()
            .filter(|o| o.kind.is_transport())
            .map(|o| o.id.clone())
            .collect();
        transport.sort();
        let users: Vec<String> = users.iter().map(|u| u.user_id.clone()).collect();
        if cities.len() < 2 || transport.is_empty() || users.is_empty() {
            return Err("workload needs two cities, one transport option and one user".into());
        }
        Ok(WorkloadContext {
            catalog: Arc::new(catalog),
            cities,
            transport,
            users,
            horizon_days: horizon_days.max(1),
        })
    }
}

/// One planned HTTP request. `id` is sent as the request id.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PlannedRequest {
    pub id: String,
    pub endpoint: Endpoint,
    pub method: Method,
    pub path: String,
    pub body: Option<Vec<u8>>,
}

pub struct UserPlan {
    ctx: Arc<WorkloadContext>,
    mix: Mix,
    seed: u64,
    user: usize,
    seq: u64,
    rng: Rng,
}

impl UserPlan {
    pub fn new(ctx: Arc<WorkloadContext>, mix: Mix, seed: u64, user: usize) -> Self {
        UserPlan {
            ctx,
            mix,
            seed,
            user,
            seq: 0,
            rng: seeded(seed, USER_STREAM_BASE + user as u64),
        }
    }

    fn json<T: Serialize>(v: &T) -> Option<Vec<u8>> {
        Some(serde_json::to_vec(v).expect("serializable"))
    }

    pub fn next_request(&mut self) -> PlannedRequest {
        let ctx = self.ctx.clone();
        let r = &mut self.rng;
        let endpoint = self.mix.pick(r.random_range(0..100));
        let id = format!("u{}-{}", self.user, self.seq);
        self.seq += 1;
        let (method, path, body) = match endpoint {
            Endpoint::Search => {
                let a = r.random_range(0..ctx.cities.len());
                let b = (a + r.random_range(1..ctx.cities.len())) % ctx.cities.len();
                let window = r.random_bool(0.5).then(|| {
                    let from = r.random_range(0..ctx.horizon_days as i64) * MINUTES_PER_DAY;
                    (from, from + 3 * MINUTES_PER_DAY)
                });
                let path = search_path(&ctx.cities[a], &ctx.cities[b], window.map(|w| w.0), window.map(|w| w.1));
                (Method::GET, path, None)
            }
            Endpoint::Quote => {
                let option_id = ctx.transport[r.random_range(0..ctx.transport.len())].clone();
                let date = r.random_range(0..ctx.horizon_days as i64);
                (Method::POST, "/quote".into(), Self::json(&QuoteRequest { option_id, date }))
            }
            Endpoint::Recommend => {
                let user_id = ctx.users[r.random_range(0..ctx.users.len())].clone();
                (Method::POST, "/recommend".into(), Self::json(&RecommendRequest { user_id, n: 5 }))
            }
            Endpoint::Optimize => {
                let trip_request = sample_trip_request(&ctx.catalog, ctx.horizon_days, r);
                let seed = Some(r.random_range(0..1_000_000));
                (Method::POST, "/optimize".into(), Self::json(&OptimizeRequest { trip_request, seed }))
            }
            Endpoint::Booking => {
                let leg = ctx.transport[r.random_range(0..ctx.transport.len())].clone();
                let user_id = ctx.users[r.random_range(0..ctx.users.len())].clone();
                let req = BookingRequest {
                    user_id,
                    itinerary: Itinerary {
                        slots: vec![leg],
                        nights: 0,
                    },
                    idempotency_key: format!("w{}-{}", self.seed, id),
                    trip_request: None,
                    auto_confirm: true,
                };
                (Method::POST, "/bookings".into(), Self::json(&req))
            }
        };
        PlannedRequest {
            id,
            endpoint,
            method,
            path,
            body,
        }
    }
}

/// The first `n` requests of user `user`, for determinism checks and replays.
pub fn plan(ctx: &Arc<WorkloadContext>, mix: Mix, seed: u64, user: usize, n: usize) -> Vec<PlannedRequest> {
    let mut p = UserPlan::new(ctx.clone(), mix, seed, user);
    (0..n).map(|_| p.next_request()).collect()
}
