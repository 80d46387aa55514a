//! Deterministic scenario generation.
//!
//! Cities sit on a seeded 2-D grid (100 km per grid unit). Every ordered city
//! pair gets `options_per_route` transport options of rotating kinds, and every
//! city gets the same number of hotels. Historical prices follow a linear law
//! whose coefficients are written to `meta.json`, so fitted models can be
//! checked against the truth:
//!
//! ```text
//! price = base(kind) + per_km * distance_km + per_day_before * days_before
//!       + amplitude * sin(2*pi*(day - phase) / 365) + peak_bump * is_peak + N(0, sigma)
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::forecast::features::{season_of, FeatureVector, FEATURE_DIM};
use crate::model::{
    BudgetBand, Catalog, FitnessWeights, OptionId, OptionKind, Rating, TravelOption, TripRequest,
    UserProfile, MINUTES_PER_DAY,
};
use crate::recommend::{content_score, ContentWeights};
use crate::rng::{seeded, streams, Rng};
use crate::sustainability::CarbonConfig;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("degenerate scenario: {0}")]
    DegenerateScenario(String),
    #[error("invalid scenario parameters: {0}")]
    InvalidParams(String),
    #[error("empty catalog")]
    EmptyCatalog,
    #[error("scenario bundle {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("scenario bundle {path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasePrices {
    pub flight: f64,
    pub train: f64,
    pub bus: f64,
    pub car_rental: f64,
    pub hotel: f64,
}

impl BasePrices {
    pub fn get(&self, kind: OptionKind) -> f64 {
        match kind {
            OptionKind::Flight => self.flight,
            OptionKind::Train => self.train,
            OptionKind::Bus => self.bus,
            OptionKind::CarRental => self.car_rental,
            OptionKind::Hotel => self.hotel,
        }
    }
}

impl Default for BasePrices {
    fn default() -> Self {
        BasePrices {
            flight: 90.0,
            train: 40.0,
            bus: 20.0,
            car_rental: 50.0,
            hotel: 70.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioParams {
    pub seed: u64,
    pub n_cities: usize,
    pub options_per_route: usize,
    pub n_users: usize,
    pub n_history_days: usize,
    pub base_price: BasePrices,
    pub seasonal_amplitude: f64,
    pub noise_sigma: f64,
    pub peak_days: BTreeSet<u32>,

    /// Days over which catalog departures are spread.
    pub horizon_days: u32,
    /// Day of year the scenario epoch falls on.
    pub start_day_of_year: u32,
    pub per_km: f64,
    pub per_day_before: f64,
    pub peak_bump: f64,
    pub seasonal_phase_days: f64,
    pub max_days_before: u32,
    pub observations_per_day: usize,
    /// Booking lead time used for catalog list prices.
    pub list_price_days_before: u32,
    pub transport_capacity: u32,
    pub hotel_capacity: u32,
    pub ratings_per_user: usize,
    pub demand_base: f64,
    pub demand_weekly_amplitude: f64,
    pub demand_noise: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            seed: 42,
            n_cities: 6,
            options_per_route: 3,
            n_users: 50,
            n_history_days: 365,
            base_price: BasePrices::default(),
            seasonal_amplitude: 10.0,
            noise_sigma: 3.0,
            peak_days: (182..=212).chain(355..=365).collect(),
            horizon_days: 14,
            start_day_of_year: 152,
            per_km: 0.12,
            per_day_before: -0.2,
            peak_bump: 25.0,
            seasonal_phase_days: 80.0,
            max_days_before: 60,
            observations_per_day: 20,
            list_price_days_before: 21,
            transport_capacity: 300,
            hotel_capacity: 2000,
            ratings_per_user: 8,
            demand_base: 200.0,
            demand_weekly_amplitude: 0.2,
            demand_noise: 0.05,
        }
    }
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_cities < 2 {
            return Err(SynthError::DegenerateScenario(format!(
                "n_cities = {} (need at least 2)",
                self.n_cities
            )));
        }
        if self.options_per_route < 1 {
            return Err(SynthError::InvalidParams("options_per_route must be >= 1".into()));
        }
        let nonneg = [
            ("noise_sigma", self.noise_sigma),
            ("seasonal_amplitude", self.seasonal_amplitude),
            ("demand_noise", self.demand_noise),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SynthError::InvalidParams(format!("{name} must be >= 0")));
            }
        }
        if self.horizon_days == 0 {
            return Err(SynthError::InvalidParams("horizon_days must be >= 1".into()));
        }
        if !(1..=366).contains(&self.start_day_of_year) {
            return Err(SynthError::InvalidParams("start_day_of_year outside 1..366".into()));
        }
        if self.peak_days.iter().any(|d| !(1..=366).contains(d)) {
            return Err(SynthError::InvalidParams("peak day outside 1..366".into()));
        }
        for k in OptionKind::ALL {
            if self.base_price.get(k).is_nan() || self.base_price.get(k) <= 0.0 {
                return Err(SynthError::InvalidParams(format!("base price of {k:?} must be > 0")));
            }
        }
        Ok(())
    }

    /// Day of year of an absolute scenario minute.
    pub fn day_of_year_at(&self, minute: i64) -> u32 {
        let day = minute.div_euclid(MINUTES_PER_DAY);
        ((self.start_day_of_year as i64 - 1 + day).rem_euclid(365) + 1) as u32
    }

    pub fn is_peak(&self, day_of_year: u32) -> bool {
        self.peak_days.contains(&day_of_year)
    }
}

/// Coefficients of the price law. `coefficients[kind]` lines up with
/// [`FeatureVector`]: intercept, distance, days before, sin(day), cos(day), peak.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceLaw {
    pub per_km: f64,
    pub per_day_before: f64,
    pub seasonal_amplitude: f64,
    pub seasonal_phase_days: f64,
    pub peak_bump: f64,
    pub noise_sigma: f64,
    pub coefficients: BTreeMap<OptionKind, Vec<f64>>,
}

impl PriceLaw {
    pub fn from_params(p: &ScenarioParams) -> Self {
        let w = 2.0 * PI * p.seasonal_phase_days / 365.0;
        // A sin(x - phi) = A cos(phi) sin(x) - A sin(phi) cos(x)
        let sin_coef = p.seasonal_amplitude * w.cos();
        let cos_coef = -p.seasonal_amplitude * w.sin();
        let coefficients = OptionKind::TRANSPORT
            .iter()
            .map(|&k| {
                (
                    k,
                    vec![
                        p.base_price.get(k),
                        p.per_km,
                        p.per_day_before,
                        sin_coef,
                        cos_coef,
                        p.peak_bump,
                    ],
                )
            })
            .collect();
        PriceLaw {
            per_km: p.per_km,
            per_day_before: p.per_day_before,
            seasonal_amplitude: p.seasonal_amplitude,
            seasonal_phase_days: p.seasonal_phase_days,
            peak_bump: p.peak_bump,
            noise_sigma: p.noise_sigma,
            coefficients,
        }
    }

    /// Noiseless price for a feature vector of the given kind.
    pub fn price(&self, kind: OptionKind, features: &FeatureVector) -> Option<f64> {
        let c = self.coefficients.get(&kind)?;
        debug_assert_eq!(c.len(), FEATURE_DIM);
        Some(c.iter().zip(features.values()).map(|(a, b)| a * b).sum())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceObservation {
    pub route: (String, String),
    pub kind: OptionKind,
    pub day_of_year: u32,
    pub days_before_departure: u32,
    pub is_peak: u8,
    pub distance_km: f64,
    pub observed_price: f64,
}

impl PriceObservation {
    pub fn features(&self) -> FeatureVector {
        FeatureVector::new(
            self.distance_km,
            self.days_before_departure as f64,
            self.day_of_year,
            self.is_peak == 1,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandPoint {
    pub day_index: u32,
    pub day_of_year: u32,
    pub day_of_week: u32,
    pub count: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub observations: Vec<PriceObservation>,
    pub ratings: BTreeMap<String, Vec<Rating>>,
    pub demand_log: Vec<DemandPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMeta {
    pub seed: u64,
    pub params: ScenarioParams,
    pub law: PriceLaw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioBundle {
    pub meta: ScenarioMeta,
    pub catalog: Catalog,
    pub users: Vec<UserProfile>,
    pub history: History,
}

const CITY_CODES: [&str; 20] = [
    "AMS", "BCN", "BER", "BRU", "CPH", "DUB", "FRA", "LIS", "LON", "LYS", "MAD", "MIL", "MUC",
    "OSL", "PAR", "PRG", "ROM", "STO", "VIE", "ZRH",
];

pub fn city_code(i: usize) -> String {
    CITY_CODES
        .get(i)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("X{i:02}"))
}

fn kind_tag(kind: OptionKind) -> &'static str {
    match kind {
        OptionKind::Flight => "FL",
        OptionKind::Train => "TR",
        OptionKind::Bus => "BU",
        OptionKind::CarRental => "CR",
        OptionKind::Hotel => "HT",
    }
}

/// (speed km/h, fixed overhead minutes)
fn travel_profile(kind: OptionKind) -> (f64, f64) {
    match kind {
        OptionKind::Flight => (700.0, 90.0),
        OptionKind::Train => (150.0, 15.0),
        OptionKind::Bus => (70.0, 10.0),
        OptionKind::CarRental => (90.0, 0.0),
        OptionKind::Hotel => (1.0, 0.0),
    }
}

/// City positions in grid units; distinct points of a `g x g` grid.
pub fn city_layout(params: &ScenarioParams) -> Vec<(String, (f64, f64))> {
    let n = params.n_cities;
    let g = 3 * (n as f64).sqrt().ceil() as usize + 1;
    let mut rng = seeded(params.seed, streams::LAYOUT);
    let cells = sample(&mut rng, g * g, n);
    cells
        .into_iter()
        .enumerate()
        .map(|(i, cell)| (city_code(i), ((cell % g) as f64, (cell / g) as f64)))
        .collect()
}

fn distance_km(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt() * 100.0
}

fn sigma_normal(sigma: f64) -> Option<Normal<f64>> {
    (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("finite sigma"))
}

/// Adds noise, redrawing until the result is strictly positive.
fn noisy_positive(law: f64, noise: &Option<Normal<f64>>, rng: &mut Rng) -> f64 {
    let Some(n) = noise else {
        return law;
    };
    for _ in 0..64 {
        let p = law + n.sample(rng);
        if p > 0.0 {
            return p;
        }
    }
    law.max(0.01)
}

pub fn gen_catalog(params: &ScenarioParams) -> Result<Catalog, SynthError> {
    params.validate()?;
    let layout = city_layout(params);
    let law = PriceLaw::from_params(params);
    let noise = sigma_normal(params.noise_sigma);
    let mut rng = seeded(params.seed, streams::CATALOG);
    let mut options = Vec::new();

    for (oi, (origin, opos)) in layout.iter().enumerate() {
        for (di, (dest, dpos)) in layout.iter().enumerate() {
            if oi == di {
                continue;
            }
            let dist = distance_km(*opos, *dpos);
            let start = rng.random_range(0..OptionKind::TRANSPORT.len());
            for j in 0..params.options_per_route {
                let kind = OptionKind::TRANSPORT[(start + j) % OptionKind::TRANSPORT.len()];
                let (speed, overhead) = travel_profile(kind);
                let duration = ((dist / speed) * 60.0 + overhead).round().max(1.0) as i64;
                let day = rng.random_range(0..params.horizon_days) as i64;
                let minute = rng.random_range(360..=1320) as i64;
                let depart = day * MINUTES_PER_DAY + minute;
                let doy = params.day_of_year_at(depart);
                let fv = FeatureVector::new(
                    dist,
                    params.list_price_days_before as f64,
                    doy,
                    params.is_peak(doy),
                );
                let price = noisy_positive(law.price(kind, &fv).unwrap(), &noise, &mut rng);
                options.push(TravelOption {
                    id: OptionId(format!("{}-{origin}-{dest}-{j}", kind_tag(kind))),
                    kind,
                    origin: origin.clone(),
                    destination: dest.clone(),
                    depart_time: depart,
                    arrive_time: depart + duration,
                    price: round_cents(price),
                    distance_km: dist,
                    capacity: params.transport_capacity,
                    eco_rating: 0.0,
                });
            }
        }
    }
    let hotel_until = (params.horizon_days as i64 + 30) * MINUTES_PER_DAY;
    for (city, _) in &layout {
        for j in 0..params.options_per_route {
            let factor = 0.6 + 0.8 * rng.random::<f64>();
            let eco = (rng.random::<f64>() * 100.0).round() / 100.0;
            options.push(TravelOption {
                id: OptionId(format!("HT-{city}-{j}")),
                kind: OptionKind::Hotel,
                origin: String::new(),
                destination: city.clone(),
                depart_time: 0,
                arrive_time: hotel_until,
                price: round_cents(params.base_price.hotel * factor),
                distance_km: 0.0,
                capacity: params.hotel_capacity,
                eco_rating: eco,
            });
        }
    }
    Ok(Catalog::new(layout.into_iter().map(|(c, _)| c), options)?)
}

fn round_cents(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

pub fn gen_users(params: &ScenarioParams) -> Result<Vec<UserProfile>, SynthError> {
    params.validate()?;
    let mut rng = seeded(params.seed, streams::USERS);
    let bands = [BudgetBand::Low, BudgetBand::Mid, BudgetBand::High];
    Ok((0..params.n_users)
        .map(|i| {
            let preferred_modes = OptionKind::TRANSPORT
                .into_iter()
                .filter(|_| rng.random_bool(0.4))
                .collect();
            UserProfile {
                user_id: format!("u{i:04}"),
                preferred_modes,
                budget_band: bands[rng.random_range(0..3)],
                eco_affinity: rng.random::<f64>(),
                booking_history: Vec::new(),
            }
        })
        .collect())
}

/// Price observations, user ratings and a daily request-count log.
pub fn gen_history(
    params: &ScenarioParams,
    catalog: &Catalog,
    users: &[UserProfile],
) -> Result<History, SynthError> {
    params.validate()?;
    if catalog.is_empty() {
        return Err(SynthError::EmptyCatalog);
    }
    let law = PriceLaw::from_params(params);
    let noise = sigma_normal(params.noise_sigma);
    let transport: Vec<&TravelOption> =
        catalog.options().iter().filter(|o| o.kind.is_transport()).collect();
    if transport.is_empty() {
        return Err(SynthError::EmptyCatalog);
    }

    let mut rng = seeded(params.seed, streams::HISTORY);
    let n_obs = params.n_history_days * params.observations_per_day;
    let mut observations = Vec::with_capacity(n_obs);
    for _ in 0..n_obs {
        let opt = transport[rng.random_range(0..transport.len())];
        let doy = rng.random_range(1..=365u32);
        let days_before = rng.random_range(0..=params.max_days_before);
        let peak = params.is_peak(doy);
        let fv = FeatureVector::new(opt.distance_km, days_before as f64, doy, peak);
        let price = noisy_positive(law.price(opt.kind, &fv).unwrap(), &noise, &mut rng);
        observations.push(PriceObservation {
            route: (opt.origin.clone(), opt.destination.clone()),
            kind: opt.kind,
            day_of_year: doy,
            days_before_departure: days_before,
            is_peak: peak as u8,
            distance_km: opt.distance_km,
            observed_price: price,
        });
    }

    let mut rng = seeded(params.seed, streams::RATINGS);
    let carbon = CarbonConfig::default();
    let weights = ContentWeights::default();
    let rating_noise = Normal::new(0.0, 0.5).expect("valid sigma");
    let bands = crate::recommend::PriceBands::from_catalog(catalog);
    let mut ratings = BTreeMap::new();
    let k = params.ratings_per_user.min(catalog.len());
    for u in users {
        let picks = sample(&mut rng, catalog.len(), k);
        let mut rs: Vec<Rating> = picks
            .into_iter()
            .map(|i| {
                let opt = &catalog.options()[i];
                let affinity = content_score(u, opt, &bands, &carbon, &weights);
                let r = (1.0 + 4.0 * affinity + rating_noise.sample(&mut rng)).round();
                Rating {
                    option_id: opt.id.clone(),
                    rating: r.clamp(1.0, 5.0),
                }
            })
            .collect();
        rs.sort_by(|a, b| a.option_id.cmp(&b.option_id));
        ratings.insert(u.user_id.clone(), rs);
    }

    let demand_log = gen_demand_log(params, params.n_history_days);
    Ok(History {
        observations,
        ratings,
        demand_log,
    })
}

/// Daily request counts starting on January 1st: a per-season level, a weekly
/// wave and multiplicative Gaussian noise of relative size `demand_noise`.
pub fn gen_demand_log(params: &ScenarioParams, days: usize) -> Vec<DemandPoint> {
    let mut rng = seeded(params.seed, streams::DEMAND);
    let noise = sigma_normal(params.demand_noise);
    let season_mid = [46.0, 137.0, 228.0, 320.0];
    (0..days as u32)
        .map(|d| {
            let doy = d % 365 + 1;
            let dow = d % 7;
            let s = season_of(doy);
            let level =
                1.0 + 0.3 * (2.0 * PI * (season_mid[s] - params.seasonal_phase_days) / 365.0).sin();
            let weekly = 1.0 + params.demand_weekly_amplitude * (2.0 * PI * dow as f64 / 7.0).sin();
            let eps = noise.as_ref().map(|n| n.sample(&mut rng)).unwrap_or(0.0);
            let count = (params.demand_base * level * weekly * (1.0 + eps)).max(0.0).round();
            DemandPoint {
                day_index: d,
                day_of_year: doy,
                day_of_week: dow,
                count,
            }
        })
        .collect()
}

pub fn gen_scenario(params: &ScenarioParams) -> Result<ScenarioBundle, SynthError> {
    let catalog = gen_catalog(params)?;
    let mut users = gen_users(params)?;
    let history = gen_history(params, &catalog, &users)?;
    for u in &mut users {
        if let Some(r) = history.ratings.get(&u.user_id) {
            u.booking_history = r.clone();
        }
    }
    Ok(ScenarioBundle {
        meta: ScenarioMeta {
            seed: params.seed,
            params: params.clone(),
            law: PriceLaw::from_params(params),
        },
        catalog,
        users,
        history,
    })
}

/// A trip between two distinct catalog cities over the whole catalog horizon.
///
/// Nights are drawn from `0..=2`, each transport mode is preferred with
/// probability 0.3 and weights are uniform draws, normalized. The request may
/// be infeasible for the catalog; callers that need feasibility must check.
pub fn sample_trip_request(catalog: &Catalog, horizon_days: u32, rng: &mut Rng) -> TripRequest {
    let cities: Vec<&String> = catalog.cities().iter().collect();
    assert!(cities.len() >= 2, "need two cities");
    let pair = sample(rng, cities.len(), 2);
    let raw: [f64; 4] = std::array::from_fn(|_| rng.random::<f64>() + 0.05);
    let preferred_modes = OptionKind::TRANSPORT
        .iter()
        .copied()
        .filter(|_| rng.random_bool(0.3))
        .collect();
    TripRequest {
        origin: cities[pair.index(0)].clone(),
        destination: cities[pair.index(1)].clone(),
        earliest_departure: 0,
        latest_arrival: (horizon_days as i64 + 2) * MINUTES_PER_DAY,
        nights: rng.random_range(0..=2),
        budget: 5000.0,
        preferred_modes,
        weights: FitnessWeights::new(raw[0], raw[1], raw[2], raw[3]).expect("positive weights"),
    }
}

/// A small two-city instance whose search space has at most 64 combinations:
/// 2 or 3 slots (hotel present when `nights = 1`) with 1 to 4 candidates each.
pub fn gen_oracle_instance(seed: u64) -> (Catalog, TripRequest) {
    let mut rng = seeded(seed, streams::ORACLE);
    let nights = rng.random_range(0..=1u32);
    let dist = rng.random_range(200.0..1500.0f64).round();
    let mut options = Vec::new();
    let mut leg = |o: &str, d: &str, day: i64, tag: &str, rng: &mut Rng| {
        let n = rng.random_range(1..=4);
        for j in 0..n {
            let kind = OptionKind::TRANSPORT[rng.random_range(0..4)];
            let (speed, overhead) = travel_profile(kind);
            let depart = day * MINUTES_PER_DAY + rng.random_range(360..=900);
            options.push(TravelOption {
                id: OptionId(format!("{tag}-{j}")),
                kind,
                origin: o.into(),
                destination: d.into(),
                depart_time: depart,
                arrive_time: depart + ((dist / speed) * 60.0 + overhead).round() as i64,
                price: rng.random_range(20.0..400.0f64).round(),
                distance_km: dist,
                capacity: 100,
                eco_rating: 0.0,
            });
        }
    };
    leg("AAA", "BBB", 0, "out", &mut rng);
    leg("BBB", "AAA", 4, "ret", &mut rng);
    if nights > 0 {
        for j in 0..rng.random_range(1..=4) {
            options.push(TravelOption {
                id: OptionId(format!("hotel-{j}")),
                kind: OptionKind::Hotel,
                origin: String::new(),
                destination: "BBB".into(),
                depart_time: 0,
                arrive_time: 10 * MINUTES_PER_DAY,
                price: rng.random_range(40.0..250.0f64).round(),
                distance_km: 0.0,
                capacity: 100,
                eco_rating: (rng.random::<f64>() * 100.0).round() / 100.0,
            });
        }
    }
    let catalog = Catalog::new(["AAA".to_string(), "BBB".to_string()], options).expect("valid instance");
    let request = TripRequest {
        origin: "AAA".into(),
        destination: "BBB".into(),
        earliest_departure: 0,
        latest_arrival: 6 * MINUTES_PER_DAY,
        nights,
        budget: 10_000.0,
        preferred_modes: OptionKind::TRANSPORT.iter().copied().filter(|_| rng.random_bool(0.4)).collect(),
        weights: {
            let raw: [f64; 4] = std::array::from_fn(|_| rng.random::<f64>() + 0.05);
            FitnessWeights::new(raw[0], raw[1], raw[2], raw[3]).expect("positive weights")
        },
    };
    (catalog, request)
}

pub const BUNDLE_FILES: [&str; 4] = ["catalog.json", "users.json", "history.json", "meta.json"];

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), SynthError> {
    let path = dir.join(name);
    let body = serde_json::to_vec_pretty(value).map_err(|source| SynthError::Json {
        path: path.display().to_string(),
        source,
    })?;
    fs::write(&path, body).map_err(|source| SynthError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn read_json<T: for<'de> Deserialize<'de>>(dir: &Path, name: &str) -> Result<T, SynthError> {
    let path = dir.join(name);
    let body = fs::read(&path).map_err(|source| SynthError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_slice(&body).map_err(|source| SynthError::Json {
        path: path.display().to_string(),
        source,
    })
}

impl ScenarioBundle {
    pub fn write(&self, dir: &Path) -> Result<(), SynthError> {
        fs::create_dir_all(dir).map_err(|source| SynthError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        write_json(dir, "catalog.json", &self.catalog)?;
        write_json(dir, "users.json", &self.users)?;
        write_json(dir, "history.json", &self.history)?;
        write_json(dir, "meta.json", &self.meta)
    }

    pub fn read(dir: &Path) -> Result<Self, SynthError> {
        let catalog: Catalog = read_json(dir, "catalog.json")?;
        let users: Vec<UserProfile> = read_json(dir, "users.json")?;
        for u in &users {
            u.check(&catalog)?;
        }
        Ok(ScenarioBundle {
            catalog,
            users,
            history: read_json(dir, "history.json")?,
            meta: read_json(dir, "meta.json")?,
        })
    }
}
