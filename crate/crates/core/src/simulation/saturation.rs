//! Saturation: the smallest training fraction at which a learning curve
//! reaches `threshold x reference`.

use num_traits::Num;
use serde::{Deserialize, Serialize};

use super::{LearningCurve, Metric};
use crate::{Error, Result};

pub const DEFAULT_SATURATION_THRESHOLD: f64 = 0.995;

/// First fraction whose value reaches `threshold * reference`, or `None`.
///
/// Generic so that exact rationals can be used where the floating point
/// cutoff would be ambiguous.
pub fn detect_saturation<T>(curve: &[(T, T)], reference: T, threshold: T) -> Result<Option<T>>
where
    T: Num + PartialOrd + Copy,
{
    if !(reference > T::zero()) {
        return Err(Error::Curve("reference performance must be positive".into()));
    }
    if curve.is_empty() {
        return Err(Error::Curve("empty curve".into()));
    }
    if curve.windows(2).any(|w| !(w[0].0 < w[1].0)) {
        return Err(Error::Curve("fractions must be strictly increasing".into()));
    }
    let cutoff = threshold * reference;
    Ok(curve.iter().find(|(_, v)| *v >= cutoff).map(|(f, _)| *f))
}

/// Saturation of one curve against one evaluation set and metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationEntry {
    pub eval_set: String,
    pub generalization: bool,
    pub metric: Metric,
    pub reference: f64,
    pub threshold: f64,
    pub cutoff: f64,
    pub saturation_fraction: Option<f64>,
    /// The curve dips below the cutoff again after first reaching it.
    pub falls_back_below: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationGap {
    pub eval_set: String,
    pub metric: Metric,
    /// In-domain minus generalization saturation fraction; positive means
    /// generalization saturated first. `None` when either is absent.
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationReport {
    pub strategy: String,
    pub primary_metric: Metric,
    pub threshold: f64,
    pub entries: Vec<SaturationEntry>,
    pub gaps: Vec<SaturationGap>,
}

pub(crate) fn entry_for(
    eval_set: &str,
    generalization: bool,
    metric: Metric,
    curve: &[(f64, f64)],
    reference: f64,
    threshold: f64,
) -> Result<SaturationEntry> {
    let cutoff = threshold * reference;
    let (saturation_fraction, note) = match detect_saturation(curve, reference, threshold) {
        Ok(f) => (f, None),
        Err(Error::Curve(msg)) if reference <= 0.0 => (None, Some(msg)),
        Err(e) => return Err(e),
    };
    let falls_back_below = saturation_fraction.is_some_and(|f| curve.iter().any(|(x, v)| *x > f && *v < cutoff));
    Ok(SaturationEntry {
        eval_set: eval_set.to_string(),
        generalization,
        metric,
        reference,
        threshold,
        cutoff,
        saturation_fraction,
        falls_back_below,
        note,
    })
}

/// Per-generalization-set gaps for every metric in the report.
pub fn saturation_gap(entries: &[SaturationEntry]) -> Vec<SaturationGap> {
    let mut gaps = Vec::new();
    for in_domain in entries.iter().filter(|e| !e.generalization) {
        for g in entries.iter().filter(|e| e.generalization && e.metric == in_domain.metric) {
            gaps.push(SaturationGap {
                eval_set: g.eval_set.clone(),
                metric: g.metric,
                gap: match (in_domain.saturation_fraction, g.saturation_fraction) {
                    (Some(a), Some(b)) => Some(a - b),
                    _ => None,
                },
            });
        }
    }
    gaps
}

/// Saturation of the seed-averaged curve for every evaluation set, under
/// both metrics (the configured one first).
pub fn saturation_report(curve: &LearningCurve, threshold: f64) -> Result<SaturationReport> {
    let primary = curve.config.metric;
    let mut entries = Vec::new();
    for metric in [primary, primary.other()] {
        for (name, generalization) in curve.eval_sets() {
            let series = curve.series(&curve.points, &name, metric);
            let reference = metric.of(&curve.reference[&name]);
            entries.push(entry_for(&name, generalization, metric, &series, reference, threshold)?);
        }
    }
    Ok(SaturationReport {
        strategy: curve.config.strategy.to_string(),
        primary_metric: primary,
        threshold,
        gaps: saturation_gap(&entries),
        entries,
    })
}

/// In-domain saturation fraction of every individual seed curve.
pub fn seed_saturation_fractions(curve: &LearningCurve, metric: Metric, threshold: f64) -> Result<Vec<Option<f64>>> {
    let name = curve.in_domain_name.clone();
    let reference = metric.of(&curve.reference[&name]);
    curve
        .per_seed
        .iter()
        .map(|seed_curve| {
            let series = curve.series(&seed_curve.points, &name, metric);
            Ok(entry_for(&name, false, metric, &series, reference, threshold)?.saturation_fraction)
        })
        .collect()
}
