//! Genetic itinerary optimizer.
//!
//! A chromosome holds one gene per slot: an index into that slot's candidate
//! list. Slots are fixed by the request (outbound leg, hotel when `nights > 0`,
//! return leg) and each slot's candidates are pre-filtered against the split
//! request window, so every gene combination decodes to a valid itinerary.
//!
//! The loop is: keep `elitism_count` elites, then fill the population with
//! tournament selection, one-point crossover and per-gene uniform mutation.
//! It stops after `generations` or after `convergence_patience` generations
//! without improvement of the best fitness.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::model::{
    slot_cost, slot_time, Catalog, Itinerary, OptionKind, TravelOption, TripRequest,
};
use crate::rng::{seeded, Rng};
use crate::sustainability::{carbon_estimate, CarbonConfig};

const GA_STREAM: u64 = 100;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum OptimizeError {
    #[error("infeasible request: {0}")]
    Infeasible(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid GA config: {0}")]
    InvalidConfig(String),
    #[error("invalid chromosome: {0}")]
    InvalidChromosome(String),
    #[error("search space too large: {size} combinations (limit {limit})")]
    SearchSpaceTooLarge { size: u128, limit: u128 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub elitism_count: usize,
    pub seed: u64,
    pub convergence_patience: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 50,
            generations: 100,
            tournament_size: 3,
            crossover_rate: 0.9,
            mutation_rate: 0.1,
            elitism_count: 2,
            seed: 0,
            convergence_patience: 20,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), OptimizeError> {
        let bad = |m: &str| Err(OptimizeError::InvalidConfig(m.to_owned()));
        if self.population_size < 2 {
            return bad("population_size must be >= 2");
        }
        if self.elitism_count >= self.population_size {
            return bad("elitism_count must be < population_size");
        }
        if self.tournament_size < 1 {
            return bad("tournament_size must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) || !(0.0..=1.0).contains(&self.mutation_rate) {
            return bad("rates must lie in [0, 1]");
        }
        Ok(())
    }
}

pub type Chromosome = Vec<usize>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    /// `(v - min) / (max - min)`, 0 when the range is degenerate.
    pub fn normalize(&self, v: f64) -> f64 {
        let span = self.max - self.min;
        if span <= 0.0 {
            0.0
        } else {
            (v - self.min) / span
        }
    }
}

/// Min/max of total cost, travel time and carbon over the candidate pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub cost: Range,
    pub time: Range,
    pub carbon: Range,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotCandidates {
    pub slots: Vec<Vec<TravelOption>>,
    pub nights: u32,
    pub bounds: Bounds,
}

impl SlotCandidates {
    pub fn counts(&self) -> Vec<usize> {
        self.slots.iter().map(Vec::len).collect()
    }

    /// Number of distinct chromosomes.
    pub fn space_size(&self) -> u128 {
        self.slots.iter().map(|s| s.len() as u128).product()
    }

    pub fn decode(&self, c: &[usize]) -> Itinerary {
        Itinerary {
            slots: self
                .slots
                .iter()
                .zip(c)
                .map(|(cands, &g)| cands[g].id.clone())
                .collect(),
            nights: self.nights,
        }
    }

    pub fn check(&self, c: &[usize]) -> Result<(), OptimizeError> {
        if c.len() != self.slots.len() {
            return Err(OptimizeError::InvalidChromosome(format!(
                "{} genes for {} slots",
                c.len(),
                self.slots.len()
            )));
        }
        for (i, (&g, s)) in c.iter().zip(&self.slots).enumerate() {
            if g >= s.len() {
                return Err(OptimizeError::InvalidChromosome(format!(
                    "gene {i} = {g} but slot has {} candidates",
                    s.len()
                )));
            }
        }
        Ok(())
    }
}

/// Transport candidates for one directed leg inside `[not_before, not_after]`.
fn leg_candidates(
    catalog: &Catalog,
    from: &str,
    to: &str,
    not_before: i64,
    not_after: i64,
    budget: f64,
) -> Vec<TravelOption> {
    let mut v: Vec<TravelOption> = catalog
        .route(from, to)
        .filter(|o| o.depart_time >= not_before && o.arrive_time <= not_after && o.price <= budget)
        .cloned()
        .collect();
    v.sort_by(|a, b| a.id.cmp(&b.id));
    v
}

/// Candidate lists per slot: outbound, hotel (if `nights > 0`), return.
///
/// Outbound legs must arrive by [`TripRequest::outbound_deadline`]; return legs
/// leave no earlier than [`TripRequest::return_not_before`]. Hotels must cover
/// that stay. Any single option whose cost alone exceeds the budget is dropped.
pub fn build_slot_candidates(
    catalog: &Catalog,
    request: &TripRequest,
    carbon: &CarbonConfig,
) -> Result<SlotCandidates, OptimizeError> {
    request
        .check()
        .map_err(|e| OptimizeError::InvalidRequest(e.to_string()))?;
    if catalog.is_empty() {
        return Err(OptimizeError::Infeasible("empty catalog".into()));
    }
    let deadline = request.outbound_deadline();
    let back_from = request.return_not_before();
    let mut slots = vec![leg_candidates(
        catalog,
        &request.origin,
        &request.destination,
        request.earliest_departure,
        deadline,
        request.budget,
    )];
    let mut names = vec!["outbound"];
    if request.nights > 0 {
        let mut hotels: Vec<TravelOption> = catalog
            .hotels_in(&request.destination)
            .filter(|h| {
                h.depart_time <= deadline
                    && h.arrive_time >= back_from
                    && h.capacity >= request.nights
                    && slot_cost(h, request.nights) <= request.budget
            })
            .cloned()
            .collect();
        hotels.sort_by(|a, b| a.id.cmp(&b.id));
        slots.push(hotels);
        names.push("hotel");
    }
    slots.push(leg_candidates(
        catalog,
        &request.destination,
        &request.origin,
        back_from,
        request.latest_arrival,
        request.budget,
    ));
    names.push("return");
    if let Some(i) = slots.iter().position(Vec::is_empty) {
        return Err(OptimizeError::Infeasible(format!(
            "no candidates for {} slot",
            names[i]
        )));
    }

    let range = |f: &dyn Fn(&TravelOption) -> f64| {
        let mut r = Range { min: 0.0, max: 0.0 };
        for s in &slots {
            let vals = s.iter().map(f);
            let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            r.min += lo;
            r.max += hi;
        }
        r
    };
    let nights = request.nights;
    let bounds = Bounds {
        cost: range(&|o| slot_cost(o, nights)),
        time: range(&|o| slot_time(o) as f64),
        carbon: range(&|o| carbon_estimate(o, carbon, nights)),
    };
    Ok(SlotCandidates {
        slots,
        nights,
        bounds,
    })
}

/// Weighted score in [0, 1]:
/// `w_cost (1 - cost) + w_time (1 - time) + w_pref pref + w_eco (1 - carbon)`
/// with cost, time and carbon min-max normalized over the candidate pool and
/// `pref` the share of transport legs in a preferred mode (1 if none preferred).
pub fn fitness(
    c: &[usize],
    cands: &SlotCandidates,
    request: &TripRequest,
    carbon: &CarbonConfig,
) -> Result<f64, OptimizeError> {
    cands.check(c)?;
    Ok(fitness_unchecked(c, cands, request, carbon))
}

fn fitness_unchecked(c: &[usize], cands: &SlotCandidates, request: &TripRequest, carbon: &CarbonConfig) -> f64 {
    let (mut cost, mut time, mut co2) = (0.0, 0.0, 0.0);
    let (mut legs, mut preferred) = (0usize, 0usize);
    for (s, &g) in cands.slots.iter().zip(c) {
        let o = &s[g];
        cost += slot_cost(o, cands.nights);
        time += slot_time(o) as f64;
        co2 += carbon_estimate(o, carbon, cands.nights);
        if o.kind != OptionKind::Hotel {
            legs += 1;
            if request.preferred_modes.contains(&o.kind) {
                preferred += 1;
            }
        }
    }
    let pref = if request.preferred_modes.is_empty() || legs == 0 {
        1.0
    } else {
        preferred as f64 / legs as f64
    };
    let w = &request.weights;
    let b = &cands.bounds;
    w.w_cost * (1.0 - b.cost.normalize(cost))
        + w.w_time * (1.0 - b.time.normalize(time))
        + w.w_pref * pref
        + w.w_eco * (1.0 - b.carbon.normalize(co2))
}

pub fn init_population(cands: &SlotCandidates, config: &GaConfig, rng: &mut Rng) -> Vec<Chromosome> {
    (0..config.population_size)
        .map(|_| cands.slots.iter().map(|s| rng.random_range(0..s.len())).collect())
        .collect()
}

/// Index of the fittest of `tournament_size` uniform draws with replacement;
/// ties go to the lowest population index.
pub fn select_tournament(fitnesses: &[f64], config: &GaConfig, rng: &mut Rng) -> usize {
    assert!(!fitnesses.is_empty(), "empty population");
    let mut best = rng.random_range(0..fitnesses.len());
    for _ in 1..config.tournament_size {
        let i = rng.random_range(0..fitnesses.len());
        if fitnesses[i] > fitnesses[best] || (fitnesses[i] == fitnesses[best] && i < best) {
            best = i;
        }
    }
    best
}

/// With probability `crossover_rate`, swaps suffixes after a cut in `1..len`.
pub fn crossover_onepoint(a: &[usize], b: &[usize], config: &GaConfig, rng: &mut Rng) -> (Chromosome, Chromosome) {
    assert_eq!(a.len(), b.len(), "parents differ in length");
    if a.len() < 2 || !rng.random_bool(config.crossover_rate) {
        return (a.to_vec(), b.to_vec());
    }
    let cut = rng.random_range(1..a.len());
    (crossover_at(a, b, cut), crossover_at(b, a, cut))
}

/// `a[..cut] ++ b[cut..]`
pub fn crossover_at(a: &[usize], b: &[usize], cut: usize) -> Chromosome {
    a[..cut].iter().chain(&b[cut..]).copied().collect()
}

/// Each gene is resampled uniformly from its slot with probability `mutation_rate`.
pub fn mutate(c: &mut [usize], cands: &SlotCandidates, config: &GaConfig, rng: &mut Rng) {
    for (g, s) in c.iter_mut().zip(&cands.slots) {
        if rng.random_bool(config.mutation_rate) {
            *g = rng.random_range(0..s.len());
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub best: Chromosome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaTrace {
    pub generations: Vec<GenerationStats>,
    pub stopped_early: bool,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub itinerary: Itinerary,
    pub chromosome: Chromosome,
    pub fitness: f64,
}

fn argmax(f: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in f.iter().enumerate() {
        if v > f[best] {
            best = i;
        }
    }
    best
}

pub fn evolve(
    catalog: &Catalog,
    request: &TripRequest,
    config: &GaConfig,
    carbon: &CarbonConfig,
) -> Result<(Optimum, GaTrace), OptimizeError> {
    config.validate()?;
    let cands = build_slot_candidates(catalog, request, carbon)?;
    Ok(evolve_candidates(&cands, request, config, carbon))
}

pub fn evolve_candidates(
    cands: &SlotCandidates,
    request: &TripRequest,
    config: &GaConfig,
    carbon: &CarbonConfig,
) -> (Optimum, GaTrace) {
    let mut rng = seeded(config.seed, GA_STREAM);
    let eval = |pop: &[Chromosome]| -> Vec<f64> {
        pop.iter().map(|c| fitness_unchecked(c, cands, request, carbon)).collect()
    };
    let stats = |generation: usize, pop: &[Chromosome], fit: &[f64]| {
        let b = argmax(fit);
        GenerationStats {
            generation,
            best_fitness: fit[b],
            mean_fitness: fit.iter().sum::<f64>() / fit.len() as f64,
            best: pop[b].clone(),
        }
    };

    let mut pop = init_population(cands, config, &mut rng);
    let mut fit = eval(&pop);
    let mut evaluations = fit.len();
    let mut trace = GaTrace {
        generations: vec![stats(0, &pop, &fit)],
        stopped_early: false,
        evaluations: 0,
    };
    let b = argmax(&fit);
    let mut best = (pop[b].clone(), fit[b]);
    let mut stagnant = 0;

    if cands.space_size() > 1 {
        for g in 1..=config.generations {
            let mut order: Vec<usize> = (0..pop.len()).collect();
            order.sort_by(|&i, &j| fit[j].total_cmp(&fit[i]).then(i.cmp(&j)));
            let mut next: Vec<Chromosome> = order[..config.elitism_count].iter().map(|&i| pop[i].clone()).collect();
            while next.len() < config.population_size {
                let p1 = select_tournament(&fit, config, &mut rng);
                let p2 = select_tournament(&fit, config, &mut rng);
                let (mut c1, mut c2) = crossover_onepoint(&pop[p1], &pop[p2], config, &mut rng);
                mutate(&mut c1, cands, config, &mut rng);
                mutate(&mut c2, cands, config, &mut rng);
                next.push(c1);
                if next.len() < config.population_size {
                    next.push(c2);
                }
            }
            pop = next;
            fit = eval(&pop);
            evaluations += fit.len();
            let s = stats(g, &pop, &fit);
            if s.best_fitness > best.1 {
                best = (s.best.clone(), s.best_fitness);
                stagnant = 0;
            } else {
                stagnant += 1;
            }
            trace.generations.push(s);
            if stagnant >= config.convergence_patience {
                trace.stopped_early = g < config.generations;
                break;
            }
        }
    }
    trace.evaluations = evaluations;
    (
        Optimum {
            itinerary: cands.decode(&best.0),
            chromosome: best.0,
            fitness: best.1,
        },
        trace,
    )
}

pub const BRUTE_FORCE_LIMIT: u128 = 1_000_000;

/// Exhaustive search; ties resolve to the lexicographically smallest chromosome.
pub fn brute_force_optimum(
    catalog: &Catalog,
    request: &TripRequest,
    carbon: &CarbonConfig,
) -> Result<Optimum, OptimizeError> {
    let cands = build_slot_candidates(catalog, request, carbon)?;
    brute_force_candidates(&cands, request, carbon)
}

pub fn brute_force_candidates(
    cands: &SlotCandidates,
    request: &TripRequest,
    carbon: &CarbonConfig,
) -> Result<Optimum, OptimizeError> {
    let size = cands.space_size();
    if size > BRUTE_FORCE_LIMIT {
        return Err(OptimizeError::SearchSpaceTooLarge {
            size,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let counts = cands.counts();
    let mut c = vec![0usize; counts.len()];
    let mut best = (c.clone(), fitness_unchecked(&c, cands, request, carbon));
    'outer: loop {
        // odometer increment, last slot fastest: lexicographic order
        let mut i = c.len();
        loop {
            if i == 0 {
                break 'outer;
            }
            i -= 1;
            c[i] += 1;
            if c[i] < counts[i] {
                break;
            }
            c[i] = 0;
        }
        let f = fitness_unchecked(&c, cands, request, carbon);
        if f > best.1 {
            best = (c.clone(), f);
        }
    }
    Ok(Optimum {
        itinerary: cands.decode(&best.0),
        chromosome: best.0,
        fitness: best.1,
    })
}
