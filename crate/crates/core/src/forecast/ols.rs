//! Ordinary least squares via Householder QR of the design matrix.
//!
//! Solving through QR rather than forming `X'X` keeps the conditioning of the
//! original columns, and the diagonal of `R` gives a direct rank test.

use serde::{Deserialize, Serialize};

use super::features::FeatureVector;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum OlsError {
    #[error("need at least {need} observations, got {got}")]
    TooFewObservations { need: usize, got: usize },
    #[error("singular design matrix")]
    SingularDesign,
    #[error("feature dimension mismatch: model has {expected}, features have {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value in observations")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: FeatureVector,
    pub label: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OlsConfig {
    /// Ridge penalty added to every coefficient; 0 means plain OLS.
    pub ridge: f64,
    /// Relative threshold on `|R_jj| / max |R_ii|` below which the design is singular.
    pub rank_tolerance: f64,
}

impl Default for OlsConfig {
    fn default() -> Self {
        OlsConfig {
            ridge: 0.0,
            rank_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub coefficients: Vec<f64>,
    pub training_rmse: f64,
}

pub fn fit_ols(samples: &[Sample], config: &OlsConfig) -> Result<RegressionModel, OlsError> {
    let p = samples.first().map(|s| s.features.dim()).unwrap_or(0);
    if samples.is_empty() || samples.len() < p {
        return Err(OlsError::TooFewObservations {
            need: p.max(1),
            got: samples.len(),
        });
    }
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(samples.len() + p);
    let mut y: Vec<f64> = Vec::with_capacity(samples.len() + p);
    for s in samples {
        if s.features.dim() != p {
            return Err(OlsError::DimensionMismatch {
                expected: p,
                got: s.features.dim(),
            });
        }
        if !s.label.is_finite() || s.features.values().iter().any(|v| !v.is_finite()) {
            return Err(OlsError::NonFinite);
        }
        rows.push(s.features.values().to_vec());
        y.push(s.label);
    }
    if config.ridge > 0.0 {
        let r = config.ridge.sqrt();
        for j in 0..p {
            let mut row = vec![0.0; p];
            row[j] = r;
            rows.push(row);
            y.push(0.0);
        }
    }
    let coefficients = solve_least_squares(rows, y, config.rank_tolerance)?;
    let model = RegressionModel {
        training_rmse: 0.0,
        coefficients,
    };
    let sse: f64 = samples
        .iter()
        .map(|s| {
            let e = dot(&model.coefficients, s.features.values()) - s.label;
            e * e
        })
        .sum();
    Ok(RegressionModel {
        training_rmse: (sse / samples.len() as f64).sqrt(),
        ..model
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `|A x - b|` for a tall `A` (row-major), failing on rank deficiency.
// Householder QR; indices mirror the textbook column/row notation
#[allow(clippy::needless_range_loop)]
fn solve_least_squares(mut a: Vec<Vec<f64>>, mut b: Vec<f64>, tol: f64) -> Result<Vec<f64>, OlsError> {
    let m = a.len();
    let n = a[0].len();
    // column scaling keeps the rank test independent of feature units
    let scale: Vec<f64> = (0..n)
        .map(|j| {
            let norm = a.iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt();
            if norm > 0.0 {
                norm
            } else {
                1.0
            }
        })
        .collect();
    for row in a.iter_mut() {
        for j in 0..n {
            row[j] /= scale[j];
        }
    }

    let mut diag = vec![0.0; n];
    for k in 0..n {
        let norm = (k..m).map(|i| a[i][k] * a[i][k]).sum::<f64>().sqrt();
        if norm == 0.0 {
            diag[k] = 0.0;
            continue;
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        // v = x - alpha e1, stored in place below the diagonal
        let mut v: Vec<f64> = (k..m).map(|i| a[i][k]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            diag[k] = alpha;
            continue;
        }
        for j in k..n {
            let s: f64 = (k..m).map(|i| v[i - k] * a[i][j]).sum::<f64>() * 2.0 / vnorm2;
            for i in k..m {
                a[i][j] -= s * v[i - k];
            }
        }
        let s: f64 = (k..m).map(|i| v[i - k] * b[i]).sum::<f64>() * 2.0 / vnorm2;
        for i in k..m {
            b[i] -= s * v[i - k];
        }
        diag[k] = a[k][k];
    }

    let max_diag = diag.iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
    if max_diag == 0.0 || diag.iter().any(|d| d.abs() <= tol * max_diag) {
        return Err(OlsError::SingularDesign);
    }

    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = ((k + 1)..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    for j in 0..n {
        x[j] /= scale[j];
    }
    Ok(x)
}

/// Dot product of coefficients and features, optionally clipped at zero.
pub fn predict_price(model: &RegressionModel, features: &FeatureVector, clip_at_zero: bool) -> Result<f64, OlsError> {
    if features.dim() != model.coefficients.len() {
        return Err(OlsError::DimensionMismatch {
            expected: model.coefficients.len(),
            got: features.dim(),
        });
    }
    let v = dot(&model.coefficients, features.values());
    Ok(if clip_at_zero { v.max(0.0) } else { v })
}
