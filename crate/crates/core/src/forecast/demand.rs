//! Seasonal demand model: per (day-of-week, season) cell means blended with a
//! recent moving average.

use serde::{Deserialize, Serialize};

use super::features::season_of;
use crate::synthgen::DemandPoint;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DemandError {
    #[error("empty request log")]
    Empty,
    #[error("request log does not cover a full seasonal cycle (cell dow={day_of_week} season={season} empty)")]
    IncompleteCycle { day_of_week: usize, season: usize },
    #[error("alpha must lie in [0, 1], got {0}")]
    BadAlpha(f64),
    #[error("moving-average window must be >= 1")]
    BadWindow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandModel {
    /// `cell_means[day_of_week][season]`
    pub cell_means: Vec<[f64; 4]>,
    pub moving_average: f64,
    pub alpha: f64,
    pub window: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemandQuery {
    pub day_of_week: u32,
    pub day_of_year: u32,
}

/// Fits cell means over the whole log and the moving average over its last
/// `window` entries. `alpha = 0` disables the moving-average term.
pub fn fit_demand(log: &[DemandPoint], alpha: f64, window: usize) -> Result<DemandModel, DemandError> {
    if log.is_empty() {
        return Err(DemandError::Empty);
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(DemandError::BadAlpha(alpha));
    }
    if window == 0 {
        return Err(DemandError::BadWindow);
    }
    let mut sums = vec![[0.0f64; 4]; 7];
    let mut counts = vec![[0usize; 4]; 7];
    for p in log {
        let d = (p.day_of_week % 7) as usize;
        let s = season_of(p.day_of_year);
        sums[d][s] += p.count;
        counts[d][s] += 1;
    }
    let mut cell_means = vec![[0.0f64; 4]; 7];
    for d in 0..7 {
        for s in 0..4 {
            if counts[d][s] == 0 {
                return Err(DemandError::IncompleteCycle {
                    day_of_week: d,
                    season: s,
                });
            }
            cell_means[d][s] = sums[d][s] / counts[d][s] as f64;
        }
    }
    let tail = &log[log.len().saturating_sub(window)..];
    let moving_average = tail.iter().map(|p| p.count).sum::<f64>() / tail.len() as f64;
    Ok(DemandModel {
        cell_means,
        moving_average,
        alpha,
        window,
    })
}

/// `alpha * moving_average + (1 - alpha) * cell_mean`
pub fn forecast_demand(model: &DemandModel, q: DemandQuery) -> f64 {
    let cell = model.cell_means[(q.day_of_week % 7) as usize][season_of(q.day_of_year)];
    model.alpha * model.moving_average + (1.0 - model.alpha) * cell
}
