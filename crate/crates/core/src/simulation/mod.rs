//! Active-learning simulation over a fully labeled training set.

mod compare;
mod engine;
mod export;
mod saturation;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::metrics::EvalResult;
use crate::scorer::ScorerConfig;
use crate::strategies::StrategySpec;
use crate::{Error, Result};

pub use compare::{compare_strategies, savings_points, StrategyComparison};
pub use engine::{batch_size, run_full_reference, run_simulation, run_simulation_with, EvalSets};
pub use export::{export_report, load_learning_curve, write_curve_csv, ExportPaths};
pub use saturation::{
    detect_saturation, saturation_gap, saturation_report, seed_saturation_fractions, SaturationEntry, SaturationGap,
    SaturationReport, DEFAULT_SATURATION_THRESHOLD,
};

pub const DEFAULT_BATCH_FRACTION: f64 = 0.015;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    F1,
    Em,
}

impl Metric {
    pub fn of(self, r: &EvalResult) -> f64 {
        match self {
            Metric::F1 => r.f1,
            Metric::Em => r.exact_match,
        }
    }

    pub fn other(self) -> Metric {
        match self {
            Metric::F1 => Metric::Em,
            Metric::Em => Metric::F1,
        }
    }
}

fn default_batch_fraction() -> f64 {
    DEFAULT_BATCH_FRACTION
}

fn default_threshold() -> f64 {
    DEFAULT_SATURATION_THRESHOLD
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}

fn default_strategy() -> StrategySpec {
    StrategySpec::Random
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default = "default_batch_fraction")]
    pub batch_fraction: f64,
    #[serde(default = "default_strategy")]
    pub strategy: StrategySpec,
    #[serde(default)]
    pub metric: Metric,
    #[serde(default = "default_threshold")]
    pub saturation_threshold: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Stop after this many evaluated checkpoints.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[serde(default)]
    pub scorer: ScorerConfig,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            batch_fraction: DEFAULT_BATCH_FRACTION,
            strategy: StrategySpec::Random,
            metric: Metric::F1,
            saturation_threshold: DEFAULT_SATURATION_THRESHOLD,
            seeds: default_seeds(),
            max_iterations: None,
            scorer: ScorerConfig::default(),
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.batch_fraction > 0.0 && self.batch_fraction <= 1.0) {
            return Err(Error::Config(format!("batch_fraction must be in (0, 1], got {}", self.batch_fraction)));
        }
        if !(self.saturation_threshold > 0.0 && self.saturation_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "saturation_threshold must be in (0, 1], got {}",
                self.saturation_threshold
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::Config("max_iterations must be positive".into()));
        }
        if matches!(self.strategy, StrategySpec::PerContextQuota { .. }) {
            return Err(Error::Config(
                "per_context_quota picks a single fixed batch and cannot drive a simulation".into(),
            ));
        }
        self.strategy.validate()
    }
}

/// Scores after one retraining.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: usize,
    pub labeled_count: usize,
    pub labeled_fraction: f64,
    /// Keyed by evaluation set name; the in-domain holdout comes first.
    pub scores: IndexMap<String, EvalResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedCurve {
    pub seed: u64,
    pub points: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub config: SimulationConfig,
    pub train_name: String,
    pub train_size: usize,
    pub in_domain_name: String,
    pub generalization_names: Vec<String>,
    /// Full-training-set performance per evaluation set.
    pub reference: IndexMap<String, EvalResult>,
    /// Point-wise mean over seeds.
    pub points: Vec<CurvePoint>,
    pub per_seed: Vec<SeedCurve>,
}

impl LearningCurve {
    /// `(name, is_generalization)` for every evaluation set, in order.
    pub fn eval_sets(&self) -> Vec<(String, bool)> {
        std::iter::once((self.in_domain_name.clone(), false))
            .chain(self.generalization_names.iter().map(|n| (n.clone(), true)))
            .collect()
    }

    /// `(labeled_fraction, metric)` pairs of `points` on one evaluation set.
    pub fn series(&self, points: &[CurvePoint], eval_set: &str, metric: Metric) -> Vec<(f64, f64)> {
        points
            .iter()
            .filter_map(|p| p.scores.get(eval_set).map(|r| (p.labeled_fraction, metric.of(r))))
            .collect()
    }
}
