use serde::{Deserialize, Serialize};

use super::saturation::{saturation_report, seed_saturation_fractions};
use super::{LearningCurve, Metric};
use crate::strategies::StrategySpec;
use crate::{Error, Result};

const REFERENCE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyComparison {
    pub strategy: String,
    pub eval_set: String,
    pub metric: Metric,
    pub saturation_fraction: Option<f64>,
    /// Percentage points of the training set saved relative to random.
    pub savings_vs_random: Option<f64>,
    pub never_saturates: bool,
    /// Median over seeds of the in-domain per-seed saturation fraction; a
    /// seed that never saturates counts as larger than any fraction.
    #[serde(default)]
    pub median_seed_saturation: Option<f64>,
}

/// `(random - other) * 100`.
pub fn savings_points(random_fraction: f64, other_fraction: f64) -> f64 {
    (random_fraction - other_fraction) * 100.0
}

pub(crate) fn median_with_missing(values: &[Option<f64>]) -> Option<f64> {
    let mut sorted: Vec<f64> = values.iter().map(|v| v.unwrap_or(f64::INFINITY)).collect();
    if sorted.is_empty() {
        return None;
    }
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let m = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    m.is_finite().then_some(m)
}

/// Saturation of each strategy under `metric`, with savings against the
/// random curve. All curves must share reference scores.
pub fn compare_strategies(curves: &[LearningCurve], metric: Metric, threshold: f64) -> Result<Vec<StrategyComparison>> {
    let Some(random) = curves.iter().find(|c| c.config.strategy == StrategySpec::Random) else {
        return Err(Error::Curve("comparison needs a random-strategy curve".into()));
    };
    for c in curves {
        let same = c.reference.len() == random.reference.len()
            && c.reference.iter().all(|(name, r)| {
                random.reference.get(name).is_some_and(|q| {
                    (q.f1 - r.f1).abs() <= REFERENCE_TOLERANCE
                        && (q.exact_match - r.exact_match).abs() <= REFERENCE_TOLERANCE
                })
            });
        if !same {
            return Err(Error::Curve(format!(
                "{} and random were measured against different references",
                c.config.strategy
            )));
        }
    }

    let random_report = saturation_report(random, threshold)?;
    let mut rows = Vec::new();
    for c in curves {
        let report = saturation_report(c, threshold)?;
        let median = median_with_missing(&seed_saturation_fractions(c, metric, threshold)?);
        for entry in report.entries.iter().filter(|e| e.metric == metric) {
            let baseline = random_report
                .entries
                .iter()
                .find(|e| e.metric == metric && e.eval_set == entry.eval_set)
                .and_then(|e| e.saturation_fraction);
            rows.push(StrategyComparison {
                strategy: c.config.strategy.to_string(),
                eval_set: entry.eval_set.clone(),
                metric,
                saturation_fraction: entry.saturation_fraction,
                savings_vs_random: match (baseline, entry.saturation_fraction) {
                    (Some(r), Some(o)) => Some(savings_points(r, o)),
                    _ => None,
                },
                never_saturates: entry.saturation_fraction.is_none(),
                median_seed_saturation: (!entry.generalization).then_some(median).flatten(),
            });
        }
    }
    Ok(rows)
}
