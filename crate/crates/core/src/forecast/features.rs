use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Dimensionality of the price feature schema.
pub const FEATURE_DIM: usize = 6;
pub const FEATURE_NAMES: [&str; FEATURE_DIM] = [
    "intercept",
    "distance_km",
    "days_before_departure",
    "sin_day",
    "cos_day",
    "is_peak",
];

/// Ordered regressors. The price schema is
/// `[1, distance_km, days_before_departure, sin(day), cos(day), is_peak]`;
/// other dimensionalities are allowed for generic fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(distance_km: f64, days_before: f64, day_of_year: u32, is_peak: bool) -> Self {
        let angle = 2.0 * PI * day_of_year as f64 / 365.0;
        FeatureVector(vec![
            1.0,
            distance_km,
            days_before,
            angle.sin(),
            angle.cos(),
            if is_peak { 1.0 } else { 0.0 },
        ])
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        FeatureVector(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Quarter of the year, 0..=3.
pub fn season_of(day_of_year: u32) -> usize {
    (((day_of_year.clamp(1, 366) - 1) * 4) / 366) as usize
}
