//! Domain types shared by every other module.
//!
//! All times are integer minutes since a per-scenario epoch. Hotels reuse the
//! `depart_time`/`arrive_time` pair as their check-in/check-out window.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::sustainability::{carbon_estimate, CarbonConfig};

pub const MINUTES_PER_DAY: i64 = 1440;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ModelError {
    #[error("invalid travel option {id}: {reason}")]
    InvalidOption { id: String, reason: String },
    #[error("duplicate option id {0}")]
    DuplicateId(String),
    #[error("option {id} references unknown city {city}")]
    UnknownCity { id: String, city: String },
    #[error("invalid trip request: {0}")]
    InvalidRequest(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("invalid user profile {user_id}: {reason}")]
    InvalidProfile { user_id: String, reason: String },
    #[error("invalid itinerary: {}", join_violations(.0))]
    InvalidItinerary(Vec<Violation>),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OptionId(pub String);

impl OptionId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for OptionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for OptionId {
    fn from(s: &str) -> Self {
        OptionId(s.to_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OptionKind {
    Flight,
    Train,
    Bus,
    CarRental,
    Hotel,
}

impl OptionKind {
    pub const TRANSPORT: [OptionKind; 4] = [
        OptionKind::Flight,
        OptionKind::Train,
        OptionKind::Bus,
        OptionKind::CarRental,
    ];
    pub const ALL: [OptionKind; 5] = [
        OptionKind::Flight,
        OptionKind::Train,
        OptionKind::Bus,
        OptionKind::CarRental,
        OptionKind::Hotel,
    ];

    pub fn is_transport(self) -> bool {
        self != OptionKind::Hotel
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Alias kept for call sites that only ever deal with movement between cities.
pub type TransportKind = OptionKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TravelOption {
    pub id: OptionId,
    pub kind: OptionKind,
    pub origin: String,
    pub destination: String,
    pub depart_time: i64,
    pub arrive_time: i64,
    pub price: f64,
    pub distance_km: f64,
    pub capacity: u32,
    pub eco_rating: f64,
}

impl TravelOption {
    pub fn check(&self) -> Result<(), ModelError> {
        let bad = |reason: &str| {
            Err(ModelError::InvalidOption {
                id: self.id.0.clone(),
                reason: reason.to_owned(),
            })
        };
        if self.id.0.is_empty() {
            return bad("empty id");
        }
        if !(self.price.is_finite() && self.price >= 0.0) {
            return bad("price must be finite and >= 0");
        }
        if !(self.distance_km.is_finite() && self.distance_km >= 0.0) {
            return bad("distance_km must be finite and >= 0");
        }
        if !(0.0..=1.0).contains(&self.eco_rating) {
            return bad("eco_rating outside [0,1]");
        }
        if self.kind.is_transport() {
            if self.arrive_time <= self.depart_time {
                return bad("arrive_time must be after depart_time");
            }
            if self.origin == self.destination {
                return bad("origin equals destination");
            }
        } else {
            if !self.origin.is_empty() {
                return bad("hotel origin must be empty");
            }
            if self.distance_km != 0.0 {
                return bad("hotel distance must be 0");
            }
        }
        Ok(())
    }

    /// City a traveller is in once this option is used.
    pub fn city(&self) -> &str {
        &self.destination
    }

    pub fn duration_minutes(&self) -> i64 {
        self.arrive_time - self.depart_time
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct RouteKey {
    kind: OptionKind,
    origin: String,
    destination: String,
}

#[derive(Serialize, Deserialize)]
struct CatalogRepr {
    cities: BTreeSet<String>,
    options: Vec<TravelOption>,
}

/// The inventory universe. Immutable once built; lookups are indexed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "CatalogRepr", into = "CatalogRepr")]
pub struct Catalog {
    cities: BTreeSet<String>,
    options: Vec<TravelOption>,
    by_id: HashMap<OptionId, usize>,
    by_route: HashMap<RouteKey, Vec<usize>>,
}

impl PartialEq for Catalog {
    fn eq(&self, other: &Self) -> bool {
        self.cities == other.cities && self.options == other.options
    }
}

impl TryFrom<CatalogRepr> for Catalog {
    type Error = ModelError;
    fn try_from(r: CatalogRepr) -> Result<Self, Self::Error> {
        Catalog::new(r.cities, r.options)
    }
}

impl From<Catalog> for CatalogRepr {
    fn from(c: Catalog) -> Self {
        CatalogRepr {
            cities: c.cities,
            options: c.options,
        }
    }
}

impl Catalog {
    pub fn new(
        cities: impl IntoIterator<Item = String>,
        options: Vec<TravelOption>,
    ) -> Result<Self, ModelError> {
        let cities: BTreeSet<String> = cities.into_iter().collect();
        let mut by_id = HashMap::with_capacity(options.len());
        let mut by_route: HashMap<RouteKey, Vec<usize>> = HashMap::new();
        for (i, opt) in options.iter().enumerate() {
            opt.check()?;
            for city in [&opt.origin, &opt.destination] {
                if !(city.is_empty() && !opt.kind.is_transport()) && !cities.contains(city) {
                    return Err(ModelError::UnknownCity {
                        id: opt.id.0.clone(),
                        city: city.clone(),
                    });
                }
            }
            if by_id.insert(opt.id.clone(), i).is_some() {
                return Err(ModelError::DuplicateId(opt.id.0.clone()));
            }
            by_route
                .entry(RouteKey {
                    kind: opt.kind,
                    origin: opt.origin.clone(),
                    destination: opt.destination.clone(),
                })
                .or_default()
                .push(i);
        }
        Ok(Catalog {
            cities,
            options,
            by_id,
            by_route,
        })
    }

    pub fn empty() -> Self {
        Catalog::new(Vec::new(), Vec::new()).expect("empty catalog is valid")
    }

    pub fn options(&self) -> &[TravelOption] {
        &self.options
    }

    pub fn cities(&self) -> &BTreeSet<String> {
        &self.cities
    }

    pub fn len(&self) -> usize {
        self.options.len()
    }

    pub fn is_empty(&self) -> bool {
        self.options.is_empty()
    }

    pub fn get(&self, id: &OptionId) -> Option<&TravelOption> {
        self.by_id.get(id).map(|&i| &self.options[i])
    }

    /// Options of `kind` on `origin -> destination`; hotels use an empty origin.
    pub fn lookup<'a>(
        &'a self,
        kind: OptionKind,
        origin: &str,
        destination: &str,
    ) -> impl Iterator<Item = &'a TravelOption> + 'a {
        let key = RouteKey {
            kind,
            origin: origin.to_owned(),
            destination: destination.to_owned(),
        };
        self.by_route
            .get(&key)
            .map(|v| v.as_slice())
            .unwrap_or(&[])
            .iter()
            .map(move |&i| &self.options[i])
    }

    /// All transport options on a route, any kind.
    pub fn route<'a>(
        &'a self,
        origin: &'a str,
        destination: &'a str,
    ) -> impl Iterator<Item = &'a TravelOption> + 'a {
        OptionKind::TRANSPORT
            .into_iter()
            .flat_map(move |k| self.lookup(k, origin, destination))
    }

    pub fn hotels_in<'a>(&'a self, city: &str) -> impl Iterator<Item = &'a TravelOption> + 'a {
        self.lookup(OptionKind::Hotel, "", city)
    }
}

/// Relative importance of the optimizer's objectives. Always sums to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitnessWeights {
    pub w_cost: f64,
    pub w_time: f64,
    pub w_pref: f64,
    pub w_eco: f64,
}

impl FitnessWeights {
    pub fn new(w_cost: f64, w_time: f64, w_pref: f64, w_eco: f64) -> Result<Self, ModelError> {
        let all = [w_cost, w_time, w_pref, w_eco];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ModelError::InvalidWeights(
                "weights must be finite and >= 0".into(),
            ));
        }
        let sum: f64 = all.iter().sum();
        if sum <= 0.0 {
            return Err(ModelError::InvalidWeights("weights sum to zero".into()));
        }
        Ok(FitnessWeights {
            w_cost: w_cost / sum,
            w_time: w_time / sum,
            w_pref: w_pref / sum,
            w_eco: w_eco / sum,
        })
    }

    pub fn equal() -> Self {
        FitnessWeights {
            w_cost: 0.25,
            w_time: 0.25,
            w_pref: 0.25,
            w_eco: 0.25,
        }
    }
}

impl Default for FitnessWeights {
    fn default() -> Self {
        Self::equal()
    }
}

impl<'de> Deserialize<'de> for FitnessWeights {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            w_cost: f64,
            w_time: f64,
            w_pref: f64,
            w_eco: f64,
        }
        let r = Raw::deserialize(d)?;
        FitnessWeights::new(r.w_cost, r.w_time, r.w_pref, r.w_eco).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripRequest {
    pub origin: String,
    pub destination: String,
    pub earliest_departure: i64,
    pub latest_arrival: i64,
    pub nights: u32,
    pub budget: f64,
    #[serde(default)]
    pub preferred_modes: BTreeSet<OptionKind>,
    #[serde(default)]
    pub weights: FitnessWeights,
}

impl TripRequest {
    pub fn check(&self) -> Result<(), ModelError> {
        if self.origin == self.destination {
            return Err(ModelError::InvalidRequest(
                "origin equals destination".into(),
            ));
        }
        if self.latest_arrival <= self.earliest_departure {
            return Err(ModelError::InvalidRequest(
                "latest_arrival must be after earliest_departure".into(),
            ));
        }
        if !(self.budget.is_finite() && self.budget > 0.0) {
            return Err(ModelError::InvalidRequest("budget must be > 0".into()));
        }
        if self.preferred_modes.contains(&OptionKind::Hotel) {
            return Err(ModelError::InvalidRequest(
                "preferred_modes may only name transport kinds".into(),
            ));
        }
        Ok(())
    }

    pub fn stay_minutes(&self) -> i64 {
        self.nights as i64 * MINUTES_PER_DAY
    }

    /// Outbound legs must arrive by this instant; return legs leave no earlier
    /// than `split + stay` (and strictly after `split` on day trips). Splitting
    /// the window this way makes every per-slot choice mutually compatible.
    pub fn outbound_deadline(&self) -> i64 {
        let slack = self.latest_arrival - self.earliest_departure - self.stay_minutes();
        self.earliest_departure + slack.div_euclid(2)
    }

    pub fn return_not_before(&self) -> i64 {
        self.outbound_deadline() + self.stay_minutes().max(1)
    }
}

/// An ordered selection of options: outbound leg(s), optional hotel, return leg(s).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Itinerary {
    pub slots: Vec<OptionId>,
    #[serde(default)]
    pub nights: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItineraryTotals {
    pub total_cost: f64,
    pub total_time: i64,
    pub total_carbon_kg: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum Violation {
    EmptyItinerary,
    DanglingReference { slot: usize, id: String },
    OriginMismatch,
    BrokenChain { slot: usize },
    TimesNotIncreasing { slot: usize },
    OutsideWindow { slot: usize },
    HotelCityMismatch { slot: usize },
    StayTooShort { slot: usize },
    DestinationNotReached,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyItinerary => write!(f, "empty itinerary"),
            Violation::DanglingReference { slot, id } => {
                write!(f, "dangling reference at slot {slot} ({id})")
            }
            Violation::OriginMismatch => write!(f, "first leg does not start at request origin"),
            Violation::BrokenChain { slot } => write!(f, "broken chain at slot {slot}"),
            Violation::TimesNotIncreasing { slot } => {
                write!(f, "times not increasing at slot {slot}")
            }
            Violation::OutsideWindow { slot } => write!(f, "outside request window at slot {slot}"),
            Violation::HotelCityMismatch { slot } => write!(f, "hotel city mismatch at slot {slot}"),
            Violation::StayTooShort { slot } => write!(f, "stay too short at slot {slot}"),
            Violation::DestinationNotReached => write!(f, "destination not reached"),
        }
    }
}

/// Checks every itinerary rule and names each one that is broken.
pub fn validate_itinerary(
    itinerary: &Itinerary,
    catalog: &Catalog,
    request: &TripRequest,
) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    if itinerary.slots.is_empty() {
        return Err(vec![Violation::EmptyItinerary]);
    }
    let mut resolved = Vec::with_capacity(itinerary.slots.len());
    for (slot, id) in itinerary.slots.iter().enumerate() {
        match catalog.get(id) {
            Some(o) => resolved.push((slot, o)),
            None => out.push(Violation::DanglingReference {
                slot,
                id: id.0.clone(),
            }),
        }
    }

    let stay = itinerary.nights as i64 * MINUTES_PER_DAY;
    let mut prev_leg: Option<&TravelOption> = None;
    let mut hotel_since_prev = false;
    let mut reached = false;
    for &(slot, opt) in &resolved {
        if !opt.kind.is_transport() {
            let here = prev_leg.map(|l| l.destination.as_str()).unwrap_or(&request.origin);
            if opt.destination != here {
                out.push(Violation::HotelCityMismatch { slot });
            }
            hotel_since_prev = true;
            continue;
        }
        match prev_leg {
            None => {
                if opt.origin != request.origin {
                    out.push(Violation::OriginMismatch);
                }
            }
            Some(prev) => {
                if prev.destination != opt.origin {
                    out.push(Violation::BrokenChain { slot });
                }
                if opt.depart_time <= prev.arrive_time {
                    out.push(Violation::TimesNotIncreasing { slot });
                } else if hotel_since_prev && opt.depart_time - prev.arrive_time < stay {
                    out.push(Violation::StayTooShort { slot });
                }
            }
        }
        if opt.depart_time < request.earliest_departure || opt.arrive_time > request.latest_arrival
        {
            out.push(Violation::OutsideWindow { slot });
        }
        if opt.destination == request.destination {
            reached = true;
        }
        prev_leg = Some(opt);
        hotel_since_prev = false;
    }
    if resolved.len() == itinerary.slots.len() && !reached {
        out.push(Violation::DestinationNotReached);
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Cost of one option within an itinerary; hotel prices are nightly.
pub fn slot_cost(option: &TravelOption, nights: u32) -> f64 {
    if option.kind.is_transport() {
        option.price
    } else {
        option.price * nights as f64
    }
}

pub fn slot_time(option: &TravelOption) -> i64 {
    if option.kind.is_transport() {
        option.duration_minutes()
    } else {
        0
    }
}

/// Sums cost, in-transit minutes and carbon. The itinerary must validate
/// against `request`.
pub fn itinerary_totals(
    itinerary: &Itinerary,
    catalog: &Catalog,
    request: &TripRequest,
    carbon: &CarbonConfig,
) -> Result<ItineraryTotals, ModelError> {
    validate_itinerary(itinerary, catalog, request).map_err(ModelError::InvalidItinerary)?;
    Ok(sum_totals(itinerary, catalog, carbon))
}

/// Totals without validation; unknown ids are skipped.
pub fn sum_totals(itinerary: &Itinerary, catalog: &Catalog, carbon: &CarbonConfig) -> ItineraryTotals {
    let mut t = ItineraryTotals {
        total_cost: 0.0,
        total_time: 0,
        total_carbon_kg: 0.0,
    };
    for opt in itinerary.slots.iter().filter_map(|id| catalog.get(id)) {
        t.total_cost += slot_cost(opt, itinerary.nights);
        t.total_time += slot_time(opt);
        t.total_carbon_kg += carbon_estimate(opt, carbon, itinerary.nights);
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BudgetBand {
    Low,
    Mid,
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub option_id: OptionId,
    pub rating: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    pub preferred_modes: BTreeSet<OptionKind>,
    pub budget_band: BudgetBand,
    pub eco_affinity: f64,
    #[serde(default)]
    pub booking_history: Vec<Rating>,
}

impl UserProfile {
    pub fn check(&self, catalog: &Catalog) -> Result<(), ModelError> {
        let bad = |reason: String| {
            Err(ModelError::InvalidProfile {
                user_id: self.user_id.clone(),
                reason,
            })
        };
        if !(0.0..=1.0).contains(&self.eco_affinity) {
            return bad("eco_affinity outside [0,1]".into());
        }
        for r in &self.booking_history {
            if !(1.0..=5.0).contains(&r.rating) {
                return bad(format!("rating {} outside [1,5]", r.rating));
            }
            if catalog.get(&r.option_id).is_none() {
                return bad(format!("history references unknown option {}", r.option_id));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn leg(id: &str, kind: OptionKind, o: &str, d: &str, dep: i64, arr: i64, price: f64) -> TravelOption {
        TravelOption {
            id: id.into(),
            kind,
            origin: o.into(),
            destination: d.into(),
            depart_time: dep,
            arrive_time: arr,
            price,
            distance_km: 100.0,
            capacity: 10,
            eco_rating: 0.0,
        }
    }

    fn hotel(id: &str, city: &str, price: f64) -> TravelOption {
        TravelOption {
            id: id.into(),
            kind: OptionKind::Hotel,
            origin: String::new(),
            destination: city.into(),
            depart_time: 0,
            arrive_time: 30 * MINUTES_PER_DAY,
            price,
            distance_km: 0.0,
            capacity: 10,
            eco_rating: 0.5,
        }
    }

    fn catalog() -> Catalog {
        let cities = ["A", "B", "C", "D"].map(String::from);
        Catalog::new(
            cities,
            vec![
                leg("f1", OptionKind::Flight, "A", "B", 100, 200, 120.0),
                leg("f2", OptionKind::Flight, "C", "D", 300, 400, 90.0),
                leg("t1", OptionKind::Train, "B", "A", 3000, 3400, 40.0),
                hotel("h1", "B", 80.0),
                hotel("h2", "C", 60.0),
            ],
        )
        .unwrap()
    }

    fn request() -> TripRequest {
        TripRequest {
            origin: "A".into(),
            destination: "B".into(),
            earliest_departure: 0,
            latest_arrival: 5000,
            nights: 1,
            budget: 1000.0,
            preferred_modes: BTreeSet::new(),
            weights: FitnessWeights::equal(),
        }
    }

    fn itin(ids: &[&str], nights: u32) -> Itinerary {
        Itinerary {
            slots: ids.iter().map(|s| OptionId::from(*s)).collect(),
            nights,
        }
    }

    #[test]
    fn empty_itinerary_is_rejected() {
        let v = validate_itinerary(&itin(&[], 0), &catalog(), &request()).unwrap_err();
        assert_eq!(v, vec![Violation::EmptyItinerary]);
        assert_eq!(v[0].to_string(), "empty itinerary");
    }

    #[test]
    fn direct_flight_with_hotel_is_valid() {
        assert_eq!(
            validate_itinerary(&itin(&["f1", "h1"], 1), &catalog(), &request()),
            Ok(())
        );
        assert_eq!(
            validate_itinerary(&itin(&["f1", "h1", "t1"], 1), &catalog(), &request()),
            Ok(())
        );
    }

    #[test]
    fn broken_chain_is_named_by_slot() {
        let v = validate_itinerary(&itin(&["f1", "f2"], 0), &catalog(), &request()).unwrap_err();
        let names: Vec<String> = v.iter().map(|v| v.to_string()).collect();
        assert!(names.contains(&"broken chain at slot 1".to_string()), "{names:?}");
        // f2 departs after f1 arrives, so only the chain rule fires
        assert_eq!(v, vec![Violation::BrokenChain { slot: 1 }]);
    }

    #[test]
    fn dangling_reference_is_a_violation_not_a_panic() {
        let v = validate_itinerary(&itin(&["f1", "nope"], 0), &catalog(), &request()).unwrap_err();
        assert_eq!(
            v,
            vec![Violation::DanglingReference {
                slot: 1,
                id: "nope".into()
            }]
        );
        assert!(v[0].to_string().starts_with("dangling reference"));
    }

    #[test]
    fn window_hotel_and_stay_rules() {
        let mut r = request();
        r.latest_arrival = 150;
        let v = validate_itinerary(&itin(&["f1"], 0), &catalog(), &r).unwrap_err();
        assert_eq!(v, vec![Violation::OutsideWindow { slot: 0 }]);

        let v = validate_itinerary(&itin(&["f1", "h2"], 1), &catalog(), &request()).unwrap_err();
        assert_eq!(v, vec![Violation::HotelCityMismatch { slot: 1 }]);

        let v = validate_itinerary(&itin(&["f1", "h1", "t1"], 3), &catalog(), &request()).unwrap_err();
        assert_eq!(v, vec![Violation::StayTooShort { slot: 2 }]);

        let v = validate_itinerary(&itin(&["t1"], 0), &catalog(), &request()).unwrap_err();
        assert!(v.contains(&Violation::OriginMismatch));
    }

    #[test]
    fn totals_add_up() {
        let c = catalog();
        let cc = CarbonConfig::default();
        let t = itinerary_totals(&itin(&["f1", "h1"], 1), &c, &request(), &cc).unwrap();
        assert_eq!(t.total_cost, 200.0);
        assert_eq!(t.total_time, 100);

        let three = itin(&["f1", "h1", "t1"], 1);
        let t = itinerary_totals(&three, &c, &request(), &cc).unwrap();
        // naive per-field oracle
        let (mut cost, mut time, mut carbon) = (0.0, 0i64, 0.0);
        for id in &three.slots {
            let o = c.get(id).unwrap();
            match o.kind {
                OptionKind::Hotel => {
                    cost += o.price * 1.0;
                    carbon += 1.0 * cc.hotel_kg_per_night * (1.0 - 0.5 * o.eco_rating);
                }
                k => {
                    cost += o.price;
                    time += o.arrive_time - o.depart_time;
                    carbon += o.distance_km * cc.factor(k);
                }
            }
        }
        assert_eq!(t.total_cost, cost);
        assert_eq!(t.total_time, time);
        assert!((t.total_carbon_kg - carbon).abs() < 1e-9);
    }

    #[test]
    fn free_zero_distance_option_totals_zero() {
        let mut o = leg("z", OptionKind::Bus, "A", "B", 10, 70, 0.0);
        o.distance_km = 0.0;
        let c = Catalog::new(["A", "B"].map(String::from), vec![o]).unwrap();
        let t = itinerary_totals(&itin(&["z"], 0), &c, &request(), &CarbonConfig::default()).unwrap();
        assert_eq!((t.total_cost, t.total_time, t.total_carbon_kg), (0.0, 60, 0.0));
    }

    #[test]
    fn invalid_itinerary_totals_carry_violations() {
        let e = itinerary_totals(&itin(&[], 0), &catalog(), &request(), &CarbonConfig::default())
            .unwrap_err();
        assert_eq!(e, ModelError::InvalidItinerary(vec![Violation::EmptyItinerary]));
        assert!(e.to_string().contains("invalid itinerary"));
    }

    #[test]
    fn catalog_rejects_bad_input() {
        let dup = vec![
            leg("x", OptionKind::Bus, "A", "B", 0, 10, 1.0),
            leg("x", OptionKind::Bus, "B", "A", 0, 10, 1.0),
        ];
        assert!(matches!(
            Catalog::new(["A", "B"].map(String::from), dup),
            Err(ModelError::DuplicateId(_))
        ));
        let unknown = vec![leg("x", OptionKind::Bus, "A", "Z", 0, 10, 1.0)];
        assert!(matches!(
            Catalog::new(["A", "B"].map(String::from), unknown),
            Err(ModelError::UnknownCity { .. })
        ));
        let backwards = vec![leg("x", OptionKind::Bus, "A", "B", 10, 10, 1.0)];
        assert!(Catalog::new(["A", "B"].map(String::from), backwards).is_err());
    }

    #[test]
    fn catalog_lookup_and_json_roundtrip() {
        let c = catalog();
        let ids: Vec<_> = c.lookup(OptionKind::Flight, "A", "B").map(|o| o.id.0.as_str()).collect();
        assert_eq!(ids, ["f1"]);
        assert_eq!(c.hotels_in("B").count(), 1);
        let json = serde_json::to_string(&c).unwrap();
        let back: Catalog = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.lookup(OptionKind::Train, "B", "A").count(), 1);
    }

    #[test]
    fn weights_normalize() {
        let w = FitnessWeights::new(2.0, 1.0, 1.0, 0.0).unwrap();
        assert!((w.w_cost - 0.5).abs() < 1e-12);
        assert!((w.w_cost + w.w_time + w.w_pref + w.w_eco - 1.0).abs() < 1e-12);
        assert!(FitnessWeights::new(0.0, 0.0, 0.0, 0.0).is_err());
        assert!(FitnessWeights::new(-1.0, 1.0, 0.0, 0.0).is_err());
        let w: FitnessWeights =
            serde_json::from_str(r#"{"w_cost":1,"w_time":1,"w_pref":1,"w_eco":1}"#).unwrap();
        assert_eq!(w, FitnessWeights::equal());
    }

    #[test]
    fn request_split_leaves_room_for_stay() {
        let r = request();
        assert!(r.check().is_ok());
        assert_eq!(r.outbound_deadline(), (5000 - 1440) / 2);
        assert_eq!(r.return_not_before(), r.outbound_deadline() + 1440);
        let mut same = r.clone();
        same.destination = "A".into();
        assert!(same.check().is_err());
    }
}
