//! Sample-selection strategies.
//!
//! Every strategy is a deterministic function of the pool, the model
//! outputs of the current iteration, the run seed and the iteration index.

mod quota;
mod roundrobin;
mod worklist;

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::PoolState;
use crate::rng::{stream, stream_rng};
use crate::scorer::{PoolScore, SpanPrediction};
use crate::{Error, Result};

pub use quota::{choose_quota_contexts, select_per_context_quota, QuotaSelection};
pub use roundrobin::{select_context_roundrobin, ContextCycle};
pub use worklist::{save_worklist_csv, worklist_rows, write_worklist_csv, WorklistRow};

/// How to pick samples inside one context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WithinRule {
    #[default]
    Random,
    Uncertainty,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategySpec {
    Random,
    Uncertainty,
    Difficulty,
    ContextRoundrobin {
        #[serde(default)]
        within: WithinRule,
    },
    PerContextQuota {
        questions_per_context: usize,
        n_contexts: usize,
        #[serde(default)]
        within: WithinRule,
    },
}

impl StrategySpec {
    /// Whether the strategy needs a trained model to score the pool.
    pub fn is_model_guided(&self) -> bool {
        match self {
            StrategySpec::Random => false,
            StrategySpec::Uncertainty | StrategySpec::Difficulty => true,
            StrategySpec::ContextRoundrobin { within } | StrategySpec::PerContextQuota { within, .. } => {
                *within == WithinRule::Uncertainty
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            StrategySpec::PerContextQuota {
                questions_per_context: 0,
                ..
            }
            | StrategySpec::PerContextQuota { n_contexts: 0, .. } => {
                Err(Error::Config("quota strategy needs positive questions_per_context and n_contexts".into()))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let within = |w: &WithinRule| if *w == WithinRule::Uncertainty { "+uncertainty" } else { "" };
        match self {
            StrategySpec::Random => f.write_str("random"),
            StrategySpec::Uncertainty => f.write_str("uncertainty"),
            StrategySpec::Difficulty => f.write_str("difficulty"),
            StrategySpec::ContextRoundrobin { within: w } => write!(f, "context_roundrobin{}", within(w)),
            StrategySpec::PerContextQuota {
                questions_per_context,
                n_contexts,
                within: w,
            } => write!(f, "per_context_quota_{n_contexts}x{questions_per_context}{}", within(w)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Hard,
    Easy,
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Difficulty::Hard => "hard",
            Difficulty::Easy => "easy",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DifficultyLabel {
    pub sample_id: String,
    pub label: Difficulty,
}

/// One round's ranked choice of sample ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionBatch {
    pub ids: Vec<String>,
    pub strategy: StrategySpec,
    pub iteration: usize,
    pub scores: Option<BTreeMap<String, f64>>,
    pub labels: Option<BTreeMap<String, Difficulty>>,
}

impl SelectionBatch {
    fn new(ids: Vec<String>, strategy: StrategySpec, iteration: usize) -> Self {
        Self {
            ids,
            strategy,
            iteration,
            scores: None,
            labels: None,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Easy iff the full and truncated questions decode to the same token span.
pub fn classify_difficulty(
    sample_id: &str,
    full: &SpanPrediction<f64>,
    truncated: Option<&SpanPrediction<f64>>,
) -> Result<DifficultyLabel> {
    let truncated = truncated.ok_or_else(|| Error::MissingInput {
        what: "truncated-question prediction",
        sample_id: sample_id.to_string(),
    })?;
    let label = if full.best_span == truncated.best_span {
        Difficulty::Easy
    } else {
        Difficulty::Hard
    };
    Ok(DifficultyLabel {
        sample_id: sample_id.to_string(),
        label,
    })
}

pub fn difficulty_labels(scores: &BTreeMap<String, PoolScore>) -> BTreeMap<String, Difficulty> {
    scores
        .iter()
        .map(|(id, s)| {
            let label = classify_difficulty(id, &s.full, Some(&s.truncated)).expect("truncated prediction present");
            (id.clone(), label.label)
        })
        .collect()
}

pub fn uncertainty_scores(scores: &BTreeMap<String, PoolScore>) -> BTreeMap<String, f64> {
    scores.iter().map(|(id, s)| (id.clone(), s.uncertainty())).collect()
}

fn shuffled(ids: impl IntoIterator<Item = String>, seed: u64, iteration: usize) -> Vec<String> {
    let mut ids: Vec<String> = ids.into_iter().collect();
    ids.shuffle(&mut stream_rng(seed, stream::SELECTION, iteration as u64));
    ids
}

/// `min(k, |unlabeled|)` ids drawn uniformly without replacement.
pub fn select_random(pool: &PoolState, k: usize, seed: u64, iteration: usize) -> SelectionBatch {
    let mut ids = shuffled(pool.unlabeled().iter().cloned(), seed, iteration);
    ids.truncate(k);
    SelectionBatch::new(ids, StrategySpec::Random, iteration)
}

/// Hard samples first, then easy ones, each group in seeded random order.
pub fn select_difficulty(
    pool: &PoolState,
    k: usize,
    labels: &BTreeMap<String, Difficulty>,
    seed: u64,
    iteration: usize,
) -> Result<SelectionBatch> {
    let mut hard = Vec::new();
    let mut easy = Vec::new();
    for id in pool.unlabeled() {
        match labels.get(id) {
            Some(Difficulty::Hard) => hard.push(id.clone()),
            Some(Difficulty::Easy) => easy.push(id.clone()),
            None => {
                return Err(Error::MissingInput {
                    what: "difficulty label",
                    sample_id: id.clone(),
                })
            }
        }
    }
    let mut ids = shuffled(hard, seed, iteration);
    if ids.len() < k {
        let mut rng = stream_rng(seed, stream::SELECTION, (iteration as u64) | 1 << 63);
        easy.shuffle(&mut rng);
        ids.extend(easy);
    }
    ids.truncate(k);
    let mut batch = SelectionBatch::new(ids, StrategySpec::Difficulty, iteration);
    batch.labels = Some(batch.ids.iter().map(|id| (id.clone(), labels[id])).collect());
    Ok(batch)
}

/// Sorts by score descending, then id ascending.
pub(crate) fn rank_by_score(ids: &mut [String], scores: &BTreeMap<String, f64>) -> Result<()> {
    for id in ids.iter() {
        match scores.get(id) {
            None => {
                return Err(Error::MissingInput {
                    what: "uncertainty score",
                    sample_id: id.clone(),
                })
            }
            Some(v) if v.is_nan() => {
                return Err(Error::InvalidScore {
                    sample_id: id.clone(),
                    value: *v,
                })
            }
            Some(_) => {}
        }
    }
    ids.sort_by(|a, b| scores[b].total_cmp(&scores[a]).then_with(|| a.cmp(b)));
    Ok(())
}

/// Top `k` unlabeled samples by uncertainty; ties go to the smaller id.
pub fn select_uncertainty(
    pool: &PoolState,
    k: usize,
    scores: &BTreeMap<String, f64>,
    iteration: usize,
) -> Result<SelectionBatch> {
    let mut ids: Vec<String> = pool.unlabeled().iter().cloned().collect();
    rank_by_score(&mut ids, scores)?;
    ids.truncate(k);
    let mut batch = SelectionBatch::new(ids, StrategySpec::Uncertainty, iteration);
    batch.scores = Some(batch.ids.iter().map(|id| (id.clone(), scores[id])).collect());
    Ok(batch)
}
