//! Price and demand forecasting: least-squares regression, a Gini decision
//! tree over price ranges, a seasonal demand model, and accuracy metrics.

pub mod accuracy;
pub mod demand;
pub mod features;
pub mod ols;
pub mod tree;

pub use accuracy::{classification_accuracy, mape_accuracy, AccuracyError};
pub use demand::{fit_demand, forecast_demand, DemandError, DemandModel, DemandQuery};
pub use features::{FeatureVector, FEATURE_DIM, FEATURE_NAMES};
pub use ols::{fit_ols, predict_price, OlsConfig, OlsError, RegressionModel, Sample};
pub use tree::{classify_price_range, fit_tree, price_class, TreeConfig, TreeError, TreeModel, TreeNode};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::OptionKind;
use crate::synthgen::{DemandPoint, History, PriceObservation};

/// One regression per transport kind (the base fare differs by kind).
pub type RegressionSet = BTreeMap<OptionKind, RegressionModel>;
pub type TreeSet = BTreeMap<OptionKind, TreeModel>;

/// Everything `resa train` fits, written as `models.json` next to the scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModels {
    pub regressions: RegressionSet,
    pub trees: TreeSet,
    pub demand: Option<DemandModel>,
}

pub const MODELS_FILE: &str = "models.json";

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("regression: {0}")]
    Ols(#[from] OlsError),
    #[error("tree: {0}")]
    Tree(#[from] TreeError),
    #[error("demand: {0}")]
    Demand(#[from] DemandError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub ols: OlsConfig,
    pub tree: TreeConfig,
    pub demand_alpha: f64,
    pub demand_window: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            ols: OlsConfig::default(),
            tree: TreeConfig::default(),
            demand_alpha: 0.3,
            demand_window: 7,
        }
    }
}

/// Fits all models on a scenario history; the demand model is skipped when
/// the log is empty.
pub fn train_models(history: &History, config: &TrainConfig) -> Result<TrainedModels, TrainError> {
    let demand = if history.demand_log.is_empty() {
        None
    } else {
        Some(fit_demand(&history.demand_log, config.demand_alpha, config.demand_window)?)
    };
    Ok(TrainedModels {
        regressions: train_regressions(&history.observations, &config.ols)?,
        trees: train_trees(&history.observations, None, &config.tree)?,
        demand,
    })
}

pub fn samples_by_kind(observations: &[PriceObservation]) -> BTreeMap<OptionKind, Vec<Sample>> {
    let mut out: BTreeMap<OptionKind, Vec<Sample>> = BTreeMap::new();
    for o in observations {
        out.entry(o.kind).or_default().push(Sample {
            features: o.features(),
            label: o.observed_price,
        });
    }
    out
}

pub fn train_regressions(observations: &[PriceObservation], config: &OlsConfig) -> Result<RegressionSet, OlsError> {
    samples_by_kind(observations)
        .into_iter()
        .map(|(k, s)| fit_ols(&s, config).map(|m| (k, m)))
        .collect()
}

/// Tertile edges of a label set, rounded to whole currency units.
pub fn tertile_edges(samples: &[Sample]) -> Vec<f64> {
    let mut labels: Vec<f64> = samples.iter().map(|s| s.label).collect();
    labels.sort_by(f64::total_cmp);
    if labels.is_empty() {
        return Vec::new();
    }
    let at = |q: f64| labels[((labels.len() - 1) as f64 * q).round() as usize].round();
    let mut edges = vec![at(1.0 / 3.0), at(2.0 / 3.0)];
    edges.dedup();
    edges
}

/// Trees per kind; `edges` overrides the per-kind tertile default.
pub fn train_trees(
    observations: &[PriceObservation],
    edges: Option<&[f64]>,
    config: &TreeConfig,
) -> Result<TreeSet, TreeError> {
    samples_by_kind(observations)
        .into_iter()
        .map(|(k, s)| {
            let e = edges.map(|e| e.to_vec()).unwrap_or_else(|| tertile_edges(&s));
            fit_tree(&s, &e, config).map(|t| (k, t))
        })
        .collect()
}

pub fn eval_regression(model: &RegressionModel, holdout: &[Sample]) -> Result<f64, AccuracyError> {
    let truth: Vec<f64> = holdout.iter().map(|s| s.label).collect();
    let pred: Vec<f64> = holdout
        .iter()
        .map(|s| predict_price(model, &s.features, true).unwrap_or(f64::NAN))
        .collect();
    mape_accuracy(&pred, &truth)
}

pub fn eval_tree(tree: &TreeModel, holdout: &[Sample]) -> Result<f64, AccuracyError> {
    let truth: Vec<usize> = holdout.iter().map(|s| price_class(s.label, &tree.class_edges)).collect();
    let pred: Vec<usize> = holdout
        .iter()
        .map(|s| classify_price_range(tree, &s.features).unwrap_or(usize::MAX))
        .collect();
    classification_accuracy(&pred, &truth)
}

pub fn eval_demand(model: &DemandModel, holdout: &[DemandPoint]) -> Result<f64, AccuracyError> {
    let truth: Vec<f64> = holdout.iter().map(|p| p.count).collect();
    let pred: Vec<f64> = holdout
        .iter()
        .map(|p| {
            forecast_demand(
                model,
                DemandQuery {
                    day_of_week: p.day_of_week,
                    day_of_year: p.day_of_year,
                },
            )
        })
        .collect();
    mape_accuracy(&pred, &truth)
}
