use std::collections::{BTreeMap, HashSet};

use indexmap::IndexMap;
use rayon::prelude::*;

use super::{CurvePoint, LearningCurve, SeedCurve, SimulationConfig};
use crate::corpus::{Dataset, PoolState, Sample};
use crate::metrics::{evaluate, EvalResult};
use crate::rng::{derive_seed, stream};
use crate::scorer::{score_pool, ScorerHandle, Trainer};
use crate::strategies::{
    difficulty_labels, select_context_roundrobin, select_difficulty, select_random, select_uncertainty,
    uncertainty_scores, ContextCycle, SelectionBatch, StrategySpec, WithinRule,
};
use crate::{Error, Result};

/// The in-domain holdout plus any out-of-domain generalization sets.
#[derive(Debug, Clone, Copy)]
pub struct EvalSets<'a> {
    pub holdout: &'a Dataset,
    pub generalization: &'a [Dataset],
}

impl<'a> EvalSets<'a> {
    pub fn new(holdout: &'a Dataset, generalization: &'a [Dataset]) -> Self {
        EvalSets {
            holdout,
            generalization,
        }
    }

    fn iter(&self) -> impl Iterator<Item = &'a Dataset> + '_ {
        std::iter::once(self.holdout).chain(self.generalization.iter())
    }

    fn check_names(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for ds in self.iter() {
            if !seen.insert(ds.name.as_str()) {
                return Err(Error::Config(format!("evaluation set name {:?} is used twice", ds.name)));
            }
        }
        Ok(())
    }
}

/// Samples per batch: `ceil(b * N)`, at least one.
pub fn batch_size(batch_fraction: f64, n: usize) -> usize {
    ((batch_fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n.max(1))
}

fn check_disjoint(train: &Dataset, holdout: &Dataset) -> Result<()> {
    if let Some(s) = holdout.samples().iter().find(|s| train.sample(&s.sample_id).is_some()) {
        return Err(Error::Dataset(format!(
            "holdout sample {:?} also appears in the training pool",
            s.sample_id
        )));
    }
    if let Some(doc_id) = holdout.contexts().keys().find(|d| train.context(d).is_some()) {
        return Err(Error::Dataset(format!(
            "holdout context {doc_id:?} also appears in the training pool"
        )));
    }
    Ok(())
}

fn evaluate_all(handle: &ScorerHandle, sets: &EvalSets<'_>) -> Result<IndexMap<String, EvalResult>> {
    let mut out = IndexMap::new();
    for ds in sets.iter() {
        let evaluation = evaluate(&handle.predict_dataset(ds)?, ds);
        if !evaluation.missing.is_empty() {
            log::warn!("{}: {} samples without a prediction", ds.name, evaluation.missing.len());
        }
        out.insert(ds.name.clone(), evaluation.result);
    }
    Ok(out)
}

/// Scores of a model trained on every sample of `train`.
pub fn run_full_reference(
    train: &Dataset,
    sets: &EvalSets<'_>,
    trainer: &Trainer,
    seed: u64,
) -> Result<IndexMap<String, EvalResult>> {
    let handle = trainer.fit(train, |_| true, derive_seed(seed, stream::RETRAIN, 0))?;
    evaluate_all(&handle, sets)
}

/// Builds the trainer from `config.scorer`, computes the full-data reference
/// and runs every seed.
pub fn run_simulation(train: &Dataset, sets: &EvalSets<'_>, config: &SimulationConfig) -> Result<LearningCurve> {
    config.validate()?;
    sets.check_names()?;
    check_disjoint(train, sets.holdout)?;
    let mut datasets = vec![train];
    datasets.extend(sets.iter());
    let trainer = Trainer::from_config(&config.scorer, &datasets)?;
    let reference = run_full_reference(train, sets, &trainer, config.seeds[0])?;
    run_simulation_with(train, sets, config, &trainer, reference)
}

/// Like [`run_simulation`] with a caller-supplied trainer and reference.
pub fn run_simulation_with(
    train: &Dataset,
    sets: &EvalSets<'_>,
    config: &SimulationConfig,
    trainer: &Trainer,
    reference: IndexMap<String, EvalResult>,
) -> Result<LearningCurve> {
    config.validate()?;
    sets.check_names()?;
    check_disjoint(train, sets.holdout)?;
    if train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    for ds in sets.iter() {
        if !reference.contains_key(&ds.name) {
            return Err(Error::Config(format!("no reference score for {:?}", ds.name)));
        }
    }

    let run = |&seed: &u64| run_seed(train, sets, config, trainer, seed).map(|points| SeedCurve { seed, points });
    // A stateful external scorer sees one replica at a time.
    let per_seed: Vec<SeedCurve> = match trainer {
        Trainer::Baseline { .. } => config.seeds.par_iter().map(run).collect::<Result<_>>()?,
        Trainer::External(_) => config.seeds.iter().map(run).collect::<Result<_>>()?,
    };

    Ok(LearningCurve {
        config: config.clone(),
        train_name: train.name.clone(),
        train_size: train.len(),
        in_domain_name: sets.holdout.name.clone(),
        generalization_names: sets.generalization.iter().map(|d| d.name.clone()).collect(),
        reference,
        points: average(&per_seed),
        per_seed,
    })
}

fn average(per_seed: &[SeedCurve]) -> Vec<CurvePoint> {
    let n = per_seed.iter().map(|c| c.points.len()).min().unwrap_or(0);
    (0..n)
        .map(|i| {
            let first = &per_seed[0].points[i];
            let scores = first
                .scores
                .keys()
                .map(|name| {
                    let results: Vec<EvalResult> = per_seed.iter().map(|c| c.points[i].scores[name]).collect();
                    (name.clone(), EvalResult::mean(&results))
                })
                .collect();
            CurvePoint {
                iteration: first.iteration,
                labeled_count: first.labeled_count,
                labeled_fraction: first.labeled_fraction,
                scores,
            }
        })
        .collect()
}

fn run_seed(
    train: &Dataset,
    sets: &EvalSets<'_>,
    config: &SimulationConfig,
    trainer: &Trainer,
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    let n = train.len();
    let k = batch_size(config.batch_fraction, n);
    let mut pool = PoolState::new(train);
    let mut cycle = ContextCycle::new(train, seed);
    let mut points = Vec::new();

    // The first batch is random for every strategy: there is no model yet.
    let mut batch = select_random(&pool, k, seed, 0);
    let mut iteration = 0;
    loop {
        pool.label(&batch.ids)?;
        let handle = trainer.fit(
            train,
            |id| pool.labeled().contains(id),
            derive_seed(seed, stream::RETRAIN, iteration as u64),
        )?;
        let scores = evaluate_all(&handle, sets)?;
        let labeled_count = pool.labeled().len();
        log::debug!(
            "seed {seed} iteration {iteration}: {labeled_count}/{n} labeled, {}",
            config.strategy
        );
        points.push(CurvePoint {
            iteration,
            labeled_count,
            labeled_fraction: labeled_count as f64 / n as f64,
            scores,
        });
        if pool.is_exhausted() || config.max_iterations.is_some_and(|m| points.len() >= m) {
            break;
        }
        iteration += 1;
        batch = next_batch(&config.strategy, &handle, &pool, train, &mut cycle, k, seed, iteration)?;
        if batch.is_empty() {
            return Err(Error::Dataset(format!("strategy {} selected nothing from a non-empty pool", config.strategy)));
        }
    }
    Ok(points)
}

#[allow(clippy::too_many_arguments)]
fn next_batch(
    strategy: &StrategySpec,
    handle: &ScorerHandle,
    pool: &PoolState,
    train: &Dataset,
    cycle: &mut ContextCycle,
    k: usize,
    seed: u64,
    iteration: usize,
) -> Result<SelectionBatch> {
    let pool_scores = if strategy.is_model_guided() {
        let samples: Vec<&Sample> = pool.unlabeled().iter().filter_map(|id| train.sample(id)).collect();
        score_pool(handle, &samples, train)?
    } else {
        BTreeMap::new()
    };
    match strategy {
        StrategySpec::Random => Ok(select_random(pool, k, seed, iteration)),
        StrategySpec::Uncertainty => select_uncertainty(pool, k, &uncertainty_scores(&pool_scores), iteration),
        StrategySpec::Difficulty => select_difficulty(pool, k, &difficulty_labels(&pool_scores), seed, iteration),
        StrategySpec::ContextRoundrobin { within } => {
            let scores = (*within == WithinRule::Uncertainty).then(|| uncertainty_scores(&pool_scores));
            select_context_roundrobin(pool, k, train, cycle, *within, seed, iteration, scores.as_ref())
        }
        StrategySpec::PerContextQuota { .. } => {
            Err(Error::Config("per_context_quota cannot drive a simulation".into()))
        }
    }
}
