//! Endpoint logic as plain functions of the scenario. The HTTP layer, the
//! work model and locking live elsewhere, so both deployments run exactly this.

use resa_core::forecast::{classify_price_range, predict_price, FeatureVector};
use resa_core::model::{sum_totals, MINUTES_PER_DAY};
use resa_core::optimizer::{build_slot_candidates, evolve_candidates, GaConfig, OptimizeError};
use resa_core::recommend::{blend, recommend_collaborative, recommend_content, ContentWeights};
use resa_core::sustainability::{eco_score_from_total, greener_alternatives, CarbonBounds, CarbonConfig};
use resa_core::wire::{
    OptimizeRequest, OptimizeResponse, QuoteRequest, QuoteResponse, RecommendRequest,
    RecommendResponse, SearchResponse, TraceSummary,
};

use crate::data::Scenario;
use crate::error::ApiError;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SearchQuery {
    pub origin: String,
    pub dest: String,
    pub from: Option<i64>,
    pub to: Option<i64>,
}

impl SearchQuery {
    /// Parses `origin=..&dest=..&from=..&to=..`; bad numbers are a 400.
    pub fn parse(query: &str) -> Result<Self, ApiError> {
        let mut q = SearchQuery::default();
        let (mut has_o, mut has_d) = (false, false);
        for pair in query.split('&').filter(|p| !p.is_empty()) {
            let (k, v) = pair.split_once('=').unwrap_or((pair, ""));
            let minute = |v: &str| {
                v.parse::<i64>()
                    .map_err(|_| ApiError::bad_request(format!("malformed date {v:?}: expected integer minutes")))
            };
            match k {
                "origin" => (q.origin, has_o) = (v.to_owned(), true),
                "dest" => (q.dest, has_d) = (v.to_owned(), true),
                "from" => q.from = Some(minute(v)?),
                "to" => q.to = Some(minute(v)?),
                _ => {}
            }
        }
        if !has_o || !has_d {
            return Err(ApiError::bad_request("origin and dest are required"));
        }
        Ok(q)
    }
}

/// Transport options on the route inside `[from, to]`, by price then id.
pub fn search(s: &Scenario, q: &SearchQuery) -> Result<SearchResponse, ApiError> {
    for c in [&q.origin, &q.dest] {
        if !s.catalog.cities().contains(c.as_str()) {
            return Err(ApiError::unprocessable(format!("unknown city {c}")));
        }
    }
    let mut options: Vec<_> = s
        .catalog
        .route(&q.origin, &q.dest)
        .filter(|o| q.from.is_none_or(|f| o.depart_time >= f) && q.to.is_none_or(|t| o.arrive_time <= t))
        .cloned()
        .collect();
    options.sort_by(|a, b| a.price.total_cmp(&b.price).then_with(|| a.id.cmp(&b.id)));
    Ok(SearchResponse { options })
}

const RANGE_LABELS: [&str; 3] = ["low", "mid", "high"];

pub fn quote(s: &Scenario, req: &QuoteRequest) -> Result<QuoteResponse, ApiError> {
    let opt = s
        .catalog
        .get(&req.option_id)
        .ok_or_else(|| ApiError::not_found(format!("unknown option {}", req.option_id.0)))?;
    if !opt.kind.is_transport() {
        return Err(ApiError::unprocessable(format!("no price model for {:?}", opt.kind)));
    }
    let models = s.models.as_ref().ok_or_else(|| ApiError::unavailable("model not loaded"))?;
    let (Some(reg), Some(tree)) = (models.regressions.get(&opt.kind), models.trees.get(&opt.kind)) else {
        return Err(ApiError::unavailable("model not loaded"));
    };
    let depart_day = opt.depart_time.div_euclid(MINUTES_PER_DAY);
    let days_before = (depart_day - req.date).max(0);
    let doy = s.params.day_of_year_at(opt.depart_time);
    let fv = FeatureVector::new(opt.distance_km, days_before as f64, doy, s.params.is_peak(doy));
    let predicted_price = predict_price(reg, &fv, true).map_err(|e| ApiError::internal(e.to_string()))?;
    let price_range = classify_price_range(tree, &fv).map_err(|e| ApiError::internal(e.to_string()))?;
    let price_range_label = if tree.n_classes() == RANGE_LABELS.len() {
        RANGE_LABELS[price_range].to_owned()
    } else {
        format!("class {price_range}")
    };
    Ok(QuoteResponse {
        option_id: opt.id.clone(),
        kind: opt.kind,
        list_price: opt.price,
        predicted_price,
        price_range,
        price_range_label,
        days_before,
        day_of_year: doy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecommendConfig {
    pub lambda: f64,
    pub neighbors: usize,
    pub content: ContentWeights,
}

/// Blend of CF and content scores; users with no ratings get content only.
pub fn recommend(
    s: &Scenario,
    req: &RecommendRequest,
    cfg: &RecommendConfig,
    carbon: &CarbonConfig,
) -> Result<RecommendResponse, ApiError> {
    let profile = s
        .user(&req.user_id)
        .ok_or_else(|| ApiError::not_found(format!("unknown user {}", req.user_id)))?;
    let cf = recommend_collaborative(&s.matrix, &req.user_id, cfg.neighbors, usize::MAX)
        .map_err(|e| ApiError::not_found(e.to_string()))?;
    let cb = recommend_content(profile, &s.catalog, usize::MAX, &cfg.content, carbon);
    let lambda = if cf.cold_start { 0.0 } else { cfg.lambda };
    Ok(RecommendResponse {
        user_id: req.user_id.clone(),
        cold_start: cf.cold_start,
        recommendations: blend(&cf.recommendations, &cb, lambda, req.n),
    })
}

/// Runs the GA with the server's config, seeded from the request when given.
pub fn optimize(
    s: &Scenario,
    req: &OptimizeRequest,
    ga: &GaConfig,
    carbon: &CarbonConfig,
) -> Result<OptimizeResponse, ApiError> {
    let config = GaConfig {
        seed: req.seed.unwrap_or(ga.seed),
        ..ga.clone()
    };
    config.validate().map_err(|e| ApiError::internal(e.to_string()))?;
    let tr = &req.trip_request;
    let cands = build_slot_candidates(&s.catalog, tr, carbon).map_err(|e| match e {
        OptimizeError::Infeasible(_) | OptimizeError::InvalidRequest(_) => ApiError::unprocessable(e.to_string()),
        other => ApiError::internal(other.to_string()),
    })?;
    let (best, trace) = evolve_candidates(&cands, tr, &config, carbon);
    let totals = sum_totals(&best.itinerary, &s.catalog, carbon);
    let bounds = CarbonBounds {
        min: cands.bounds.carbon.min,
        max: cands.bounds.carbon.max,
    };
    Ok(OptimizeResponse {
        eco_score: eco_score_from_total(totals.total_carbon_kg, bounds),
        alternatives: greener_alternatives(&best.itinerary, &s.catalog, carbon, Some(tr)),
        itinerary: best.itinerary,
        fitness: best.fitness,
        totals,
        trace: TraceSummary {
            generations: trace.generations.len() - 1,
            evaluations: trace.evaluations,
            stopped_early: trace.stopped_early,
            best_fitness: trace.generations.iter().map(|g| g.best_fitness).collect(),
        },
    })
}
