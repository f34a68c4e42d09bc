use std::collections::{BTreeMap, HashMap, VecDeque};

use rand::seq::SliceRandom;

use super::{rank_by_score, SelectionBatch, StrategySpec, WithinRule};
use crate::corpus::{Dataset, PoolState};
use crate::rng::{stream, stream_rng};
use crate::Result;

/// Visiting order over context documents, fixed for a whole run, plus the
/// position where the next batch resumes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextCycle {
    order: Vec<String>,
    cursor: usize,
}

impl ContextCycle {
    pub fn new(ds: &Dataset, seed: u64) -> Self {
        let mut order: Vec<String> = ds.contexts().keys().cloned().collect();
        order.shuffle(&mut stream_rng(seed, stream::CONTEXT_CYCLE, 0));
        Self { order, cursor: 0 }
    }

    pub fn order(&self) -> &[String] {
        &self.order
    }
}

/// Cycles over contexts that still have unlabeled samples, taking one
/// sample per visit by `within`, until `k` samples are chosen.
#[allow(clippy::too_many_arguments)]
pub fn select_context_roundrobin(
    pool: &PoolState,
    k: usize,
    ds: &Dataset,
    cycle: &mut ContextCycle,
    within: WithinRule,
    seed: u64,
    iteration: usize,
    scores: Option<&BTreeMap<String, f64>>,
) -> Result<SelectionBatch> {
    let mut queues: HashMap<&str, Vec<String>> = HashMap::new();
    for id in pool.unlabeled() {
        if let Some(sample) = ds.sample(id) {
            queues.entry(sample.doc_id.as_str()).or_default().push(id.clone());
        }
    }
    let mut rng = stream_rng(seed, stream::WITHIN_CONTEXT, iteration as u64);
    let mut ordered: HashMap<&str, VecDeque<String>> = HashMap::new();
    for doc_id in &cycle.order {
        let Some(mut ids) = queues.remove(doc_id.as_str()) else {
            continue;
        };
        match (within, scores) {
            (WithinRule::Uncertainty, Some(scores)) => rank_by_score(&mut ids, scores)?,
            (WithinRule::Uncertainty, None) => rank_by_score(&mut ids, &BTreeMap::new())?,
            (WithinRule::Random, _) => ids.shuffle(&mut rng),
        }
        ordered.insert(doc_id.as_str(), ids.into());
    }

    let n = cycle.order.len();
    let mut chosen = Vec::new();
    let mut position = cycle.cursor;
    let mut idle = 0;
    while chosen.len() < k && idle < n {
        let doc_id = cycle.order[position % n].as_str();
        position = (position + 1) % n;
        match ordered.get_mut(doc_id).and_then(VecDeque::pop_front) {
            Some(id) => {
                chosen.push(id);
                idle = 0;
            }
            None => idle += 1,
        }
    }
    cycle.cursor = position;

    let mut batch = SelectionBatch::new(chosen, StrategySpec::ContextRoundrobin { within }, iteration);
    if let (WithinRule::Uncertainty, Some(scores)) = (within, scores) {
        batch.scores = Some(batch.ids.iter().map(|id| (id.clone(), scores[id])).collect());
    }
    Ok(batch)
}
