use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::{rank_by_score, SelectionBatch, StrategySpec, WithinRule};
use crate::corpus::Dataset;
use crate::rng::{stream, stream_rng};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct QuotaSelection {
    pub batch: SelectionBatch,
    pub contexts: Vec<String>,
    /// Requested minus delivered samples.
    pub shortfall: usize,
}

/// The `n_contexts` contexts a quota selection draws from: a seeded random
/// choice among contexts holding at least `questions_per_context` samples,
/// topped up with the largest remaining contexts when too few qualify.
pub fn choose_quota_contexts(ds: &Dataset, questions_per_context: usize, n_contexts: usize, seed: u64) -> Vec<String> {
    let groups = ds.samples_by_context();
    let mut ids: Vec<(&str, usize)> = groups.iter().map(|(k, v)| (*k, v.len())).filter(|(_, n)| *n > 0).collect();
    ids.shuffle(&mut stream_rng(seed, stream::SELECTION, 0));
    let (mut eligible, mut rest): (Vec<_>, Vec<_>) = ids.into_iter().partition(|(_, n)| *n >= questions_per_context);
    eligible.truncate(n_contexts);
    rest.sort_by(|a, b| b.1.cmp(&a.1));
    let missing = n_contexts - eligible.len();
    eligible.extend(rest.into_iter().take(missing));
    eligible.into_iter().map(|(k, _)| k.to_string()).collect()
}

/// Fixed-quota selection: `questions_per_context` samples from each of
/// `n_contexts` contexts.
pub fn select_per_context_quota(
    ds: &Dataset,
    questions_per_context: usize,
    n_contexts: usize,
    within: WithinRule,
    seed: u64,
    scores: Option<&BTreeMap<String, f64>>,
) -> Result<QuotaSelection> {
    let contexts = choose_quota_contexts(ds, questions_per_context, n_contexts, seed);
    let groups = ds.samples_by_context();
    let mut rng = stream_rng(seed, stream::WITHIN_CONTEXT, 0);
    let mut ids = Vec::new();
    for doc_id in &contexts {
        let mut members: Vec<String> = groups[doc_id.as_str()].iter().map(|s| s.sample_id.clone()).collect();
        match within {
            WithinRule::Random => members.shuffle(&mut rng),
            WithinRule::Uncertainty => rank_by_score(&mut members, scores.unwrap_or(&BTreeMap::new()))?,
        }
        members.truncate(questions_per_context);
        ids.extend(members);
    }
    let shortfall = questions_per_context * n_contexts - ids.len();
    let strategy = StrategySpec::PerContextQuota {
        questions_per_context,
        n_contexts,
        within,
    };
    let mut batch = SelectionBatch::new(ids, strategy, 0);
    if let (WithinRule::Uncertainty, Some(scores)) = (within, scores) {
        batch.scores = Some(batch.ids.iter().map(|id| (id.clone(), scores[id])).collect());
    }
    Ok(QuotaSelection {
        batch,
        contexts,
        shortfall,
    })
}
