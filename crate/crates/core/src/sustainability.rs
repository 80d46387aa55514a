//! Carbon heuristics: per-option emission estimates, itinerary eco scoring and
//! greener swap suggestions.

use serde::{Deserialize, Serialize};

use crate::model::{
    sum_totals, Catalog, Itinerary, OptionId, OptionKind, TravelOption, TripRequest,
    MINUTES_PER_DAY,
};

/// Emission factors. Defaults are order-of-magnitude constants, not measured data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CarbonConfig {
    pub flight_kg_per_km: f64,
    pub train_kg_per_km: f64,
    pub bus_kg_per_km: f64,
    pub car_kg_per_km: f64,
    pub hotel_kg_per_night: f64,
    pub short_haul_km: f64,
}

impl Default for CarbonConfig {
    fn default() -> Self {
        CarbonConfig {
            flight_kg_per_km: 0.25,
            train_kg_per_km: 0.04,
            bus_kg_per_km: 0.10,
            car_kg_per_km: 0.17,
            hotel_kg_per_night: 20.0,
            short_haul_km: 700.0,
        }
    }
}

impl CarbonConfig {
    pub fn factor(&self, kind: OptionKind) -> f64 {
        match kind {
            OptionKind::Flight => self.flight_kg_per_km,
            OptionKind::Train => self.train_kg_per_km,
            OptionKind::Bus => self.bus_kg_per_km,
            OptionKind::CarRental => self.car_kg_per_km,
            OptionKind::Hotel => 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let f = [
            self.flight_kg_per_km,
            self.train_kg_per_km,
            self.bus_kg_per_km,
            self.car_kg_per_km,
            self.hotel_kg_per_night,
        ];
        if f.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err("emission factors must be finite and >= 0".into());
        }
        if self.short_haul_km.is_nan() || self.short_haul_km <= 0.0 {
            return Err("short_haul_km must be > 0".into());
        }
        Ok(())
    }

    /// Largest transport factor; used to map modes onto a 0..1 eco scale.
    pub fn max_transport_factor(&self) -> f64 {
        OptionKind::TRANSPORT
            .iter()
            .map(|&k| self.factor(k))
            .fold(0.0, f64::max)
    }
}

/// kg CO2 for one option. Hotels scale with nights and are discounted by
/// up to half for a perfect eco rating.
pub fn carbon_estimate(option: &TravelOption, config: &CarbonConfig, nights: u32) -> f64 {
    if option.kind.is_transport() {
        option.distance_km * config.factor(option.kind)
    } else {
        nights as f64 * config.hotel_kg_per_night * (1.0 - 0.5 * option.eco_rating)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarbonBounds {
    pub min: f64,
    pub max: f64,
}

/// `1 - (carbon - min) / (max - min)`, with a degenerate range scoring 1.
pub fn eco_score_from_total(total_carbon: f64, bounds: CarbonBounds) -> f64 {
    let span = bounds.max - bounds.min;
    if span <= 0.0 {
        return 1.0;
    }
    (1.0 - (total_carbon - bounds.min) / span).clamp(0.0, 1.0)
}

pub fn eco_score(
    itinerary: &Itinerary,
    catalog: &Catalog,
    config: &CarbonConfig,
    bounds: CarbonBounds,
) -> f64 {
    eco_score_from_total(sum_totals(itinerary, catalog, config).total_carbon_kg, bounds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alternative {
    pub slot: usize,
    pub replacement: OptionId,
    pub saving_kg: f64,
}

/// Suggests train swaps for short-haul flights and greener same-city hotels.
///
/// A replacement train must keep the itinerary valid: it departs after the
/// previous leg arrives, leaves the stay intact before the next leg, and, when
/// a request is given, stays inside its window. Every suggestion has a strictly
/// positive saving. Sorted by saving descending, then slot, then id.
pub fn greener_alternatives(
    itinerary: &Itinerary,
    catalog: &Catalog,
    config: &CarbonConfig,
    request: Option<&TripRequest>,
) -> Vec<Alternative> {
    let resolved: Vec<Option<&TravelOption>> =
        itinerary.slots.iter().map(|id| catalog.get(id)).collect();
    let stay = itinerary.nights as i64 * MINUTES_PER_DAY;
    let mut out = Vec::new();

    for (slot, opt) in resolved.iter().enumerate() {
        let Some(opt) = opt else { continue };
        let current = carbon_estimate(opt, config, itinerary.nights);
        match opt.kind {
            OptionKind::Flight if opt.distance_km <= config.short_haul_km => {
                let prev = resolved[..slot]
                    .iter()
                    .rev()
                    .flatten()
                    .find(|o| o.kind.is_transport());
                let mut hotel_between = false;
                let mut next = None;
                for o in resolved[slot + 1..].iter().flatten() {
                    if o.kind.is_transport() {
                        next = Some(*o);
                        break;
                    }
                    hotel_between = true;
                }
                for train in catalog.lookup(OptionKind::Train, &opt.origin, &opt.destination) {
                    if let Some(p) = prev {
                        if train.depart_time <= p.arrive_time {
                            continue;
                        }
                    }
                    if let Some(n) = next {
                        let gap = n.depart_time - train.arrive_time;
                        if gap <= 0 || (hotel_between && gap < stay) {
                            continue;
                        }
                    }
                    if let Some(r) = request {
                        if train.depart_time < r.earliest_departure
                            || train.arrive_time > r.latest_arrival
                        {
                            continue;
                        }
                    }
                    let saving = current - carbon_estimate(train, config, itinerary.nights);
                    if saving > 0.0 {
                        out.push(Alternative {
                            slot,
                            replacement: train.id.clone(),
                            saving_kg: saving,
                        });
                    }
                }
            }
            OptionKind::Hotel => {
                for h in catalog.hotels_in(&opt.destination) {
                    if h.eco_rating <= opt.eco_rating {
                        continue;
                    }
                    let saving = current - carbon_estimate(h, config, itinerary.nights);
                    if saving > 0.0 {
                        out.push(Alternative {
                            slot,
                            replacement: h.id.clone(),
                            saving_kg: saving,
                        });
                    }
                }
            }
            _ => {}
        }
    }
    out.sort_by(|a, b| {
        b.saving_kg
            .total_cmp(&a.saving_kg)
            .then(a.slot.cmp(&b.slot))
            .then_with(|| a.replacement.cmp(&b.replacement))
    });
    out
}

/// Applies one suggestion, returning the modified itinerary.
pub fn apply_alternative(itinerary: &Itinerary, alt: &Alternative) -> Itinerary {
    let mut it = itinerary.clone();
    it.slots[alt.slot] = alt.replacement.clone();
    it
}
