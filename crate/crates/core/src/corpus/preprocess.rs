//! Preprocessing: question truncation, answer-length filtering, context
//! splits and summary statistics.

use std::sync::Arc;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use serde::Serialize;

use super::{Dataset, Role};
use crate::rng::seeded_rng;
use crate::{Error, Result};

pub const DEFAULT_TRUNCATION_WORDS: usize = 3;
pub const DEFAULT_MAX_ANSWER_TOKENS: usize = 30;

/// First `n_words` whitespace-delimited words joined by single spaces.
pub fn truncate_question(question: &str, n_words: usize) -> String {
    question
        .split_whitespace()
        .take(n_words)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Keeps samples whose gold answers all have at most `max_len` tokens.
pub fn filter_long_answers(ds: &Dataset, max_len: usize) -> Dataset {
    ds.retain_samples(|s| s.gold_answers.iter().all(|a| a.n_tokens() <= max_len))
}

/// Train / dev / test proportions over contexts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios(pub [f64; 3]);

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios([0.7, 0.1, 0.2])
    }
}

impl SplitRatios {
    fn validate(&self) -> Result<()> {
        if self.0.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::SplitRatios(format!("{:?} has a negative entry", self.0)));
        }
        let total: f64 = self.0.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::SplitRatios(format!("{:?} sums to {total}, not 1", self.0)));
        }
        Ok(())
    }

    /// Largest-remainder apportionment of `n` items. Equal remainders go to
    /// the earlier split. A split with a positive ratio never ends up empty:
    /// it takes one item from the largest split, and if no split can spare
    /// one the ratios are rejected.
    pub fn apportion(&self, n: usize) -> Result<[usize; 3]> {
        self.validate()?;
        let quotas: Vec<f64> = self.0.iter().map(|r| r * n as f64).collect();
        let mut counts = [0usize; 3];
        for (c, q) in counts.iter_mut().zip(&quotas) {
            *c = (q + 1e-9).floor() as usize;
        }
        let assigned: usize = counts.iter().sum();
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| {
            let fa = quotas[a] - counts[a] as f64;
            let fb = quotas[b] - counts[b] as f64;
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        for &i in order.iter().take(n.saturating_sub(assigned)) {
            counts[i] += 1;
        }
        // Starved splits borrow from the largest one while it can spare.
        for i in 0..3 {
            if self.0[i] > 0.0 && counts[i] == 0 {
                let donor = (0..3).max_by_key(|&j| (counts[j], usize::MAX - j)).expect("three splits");
                let spare = if self.0[donor] > 0.0 { 1 } else { 0 };
                if counts[donor] <= spare {
                    return Err(Error::SplitRatios(format!(
                        "split {i} has ratio {} but would receive no contexts out of {n}",
                        self.0[i]
                    )));
                }
                counts[donor] -= 1;
                counts[i] += 1;
            }
        }
        Ok(counts)
    }
}

/// Shuffles contexts under `seed` and partitions them by `ratios`; every
/// sample follows its context.
pub fn split_by_context(ds: &Dataset, ratios: SplitRatios, seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    let counts = ratios.apportion(ds.contexts().len())?;
    let mut ids: Vec<&String> = ds.contexts().keys().collect();
    ids.shuffle(&mut seeded_rng(seed));

    let mut offset = 0;
    let mut parts = Vec::with_capacity(3);
    for (count, role) in counts.iter().zip([Role::Train, Role::Dev, Role::Test]) {
        let chosen: IndexMap<String, Arc<_>> = ids[offset..offset + count]
            .iter()
            .map(|id| ((*id).clone(), ds.contexts()[*id].clone()))
            .collect();
        offset += count;
        let samples = ds
            .samples()
            .iter()
            .filter(|s| chosen.contains_key(&s.doc_id))
            .cloned()
            .collect();
        parts.push(Dataset::new(format!("{}-{}", ds.name, role), role, chosen, samples)?);
    }
    let test = parts.pop().expect("three parts");
    let dev = parts.pop().expect("three parts");
    let train = parts.pop().expect("three parts");
    Ok((train, dev, test))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub n_samples: usize,
    pub n_contexts: usize,
    pub mean_questions_per_context: Option<f64>,
    pub max_questions_per_context: usize,
    /// Averaged over every gold answer.
    pub mean_answer_tokens: Option<f64>,
}

pub fn dataset_stats(ds: &Dataset) -> DatasetStats {
    let groups = ds.samples_by_context();
    let n_contexts = groups.len();
    let max_questions_per_context = groups.values().map(Vec::len).max().unwrap_or(0);
    let mean_questions_per_context =
        (n_contexts > 0).then(|| ds.len() as f64 / n_contexts as f64);
    let (total, count) = ds
        .samples()
        .iter()
        .flat_map(|s| &s.gold_answers)
        .fold((0usize, 0usize), |(t, c), a| (t + a.n_tokens(), c + 1));
    DatasetStats {
        n_samples: ds.len(),
        n_contexts,
        mean_questions_per_context,
        max_questions_per_context,
        mean_answer_tokens: (count > 0).then(|| total as f64 / count as f64),
    }
}
