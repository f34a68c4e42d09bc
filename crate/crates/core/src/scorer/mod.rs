//! Span scoring: distributions over answer start/end tokens, their entropy,
//! the built-in baseline model and external scorer backends.

mod baseline;
mod external;
mod features;
pub mod math;
mod prediction;
mod protocol;

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{truncate_question, ContextDoc, Dataset, Sample, DEFAULT_TRUNCATION_WORDS};
use crate::{Error, Result};

pub use baseline::{
    loss_and_gradient, train_baseline, BaselineConfig, BaselineModel, HeadExample, TrainingExample,
    DEFAULT_MAX_SPAN_LEN,
};
pub use external::{
    parse_probability_response, Direction, ExternalConfig, ExternalScorer, ProbabilityResponse, TrainOutcome,
    DEFAULT_TIMEOUT, PROTOCOL_VERSION, RENORMALIZE_WARN_TOLERANCE,
};
pub use features::{featurize, FeatureConfig, FeatureMatrix, FEATURE_NAMES, FEATURE_VERSION, N_FEATURES};
pub use math::{decode_best_span, entropy, softmax};
pub use prediction::{uncertainty, SpanPrediction};
pub use protocol::{golden_battery, protocol_check, ProtocolReport, Violation};

/// Precomputed feature matrices keyed by `(doc_id, question)`.
#[derive(Debug, Default)]
pub struct FeatureCache {
    config: FeatureConfig,
    entries: HashMap<(String, String), Arc<FeatureMatrix<f64>>>,
}

impl FeatureCache {
    pub fn new(config: FeatureConfig) -> Self {
        Self {
            config,
            entries: HashMap::new(),
        }
    }

    /// Adds the full and truncated question of every sample in `ds`.
    pub fn extend_with(&mut self, ds: &Dataset) {
        let config = self.config;
        let missing: Vec<(String, String)> = ds
            .samples()
            .iter()
            .flat_map(|s| {
                [
                    (s.doc_id.clone(), s.question.clone()),
                    (s.doc_id.clone(), truncate_question(&s.question, DEFAULT_TRUNCATION_WORDS)),
                ]
            })
            .filter(|k| !self.entries.contains_key(k))
            .collect();
        let computed: Vec<_> = missing
            .into_par_iter()
            .map(|key| {
                let fm = featurize(&key.1, ds.context(&key.0).expect("validated doc id"), config);
                (key, Arc::new(fm))
            })
            .collect();
        self.entries.extend(computed);
    }

    pub fn get_or_compute(&self, question: &str, doc: &ContextDoc) -> Arc<FeatureMatrix<f64>> {
        self.entries
            .get(&(doc.doc_id.clone(), question.to_string()))
            .cloned()
            .unwrap_or_else(|| Arc::new(featurize(question, doc, self.config)))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// A trained baseline plus an optional shared feature cache.
#[derive(Debug, Clone)]
pub struct BaselineScorer {
    pub model: Arc<BaselineModel<f64>>,
    cache: Option<Arc<FeatureCache>>,
}

impl BaselineScorer {
    pub fn new(model: BaselineModel<f64>) -> Self {
        Self {
            model: Arc::new(model),
            cache: None,
        }
    }

    pub fn with_cache(model: BaselineModel<f64>, cache: Arc<FeatureCache>) -> Self {
        Self {
            model: Arc::new(model),
            cache: Some(cache),
        }
    }

    fn features(&self, question: &str, doc: &ContextDoc) -> Arc<FeatureMatrix<f64>> {
        match &self.cache {
            Some(cache) if cache.config == self.model.config.features => cache.get_or_compute(question, doc),
            _ => Arc::new(featurize(question, doc, self.model.config.features)),
        }
    }
}

/// The active span-scoring backend.
#[derive(Debug, Clone)]
pub enum ScorerHandle {
    Baseline(BaselineScorer),
    External(Arc<ExternalScorer>),
}

impl ScorerHandle {
    pub fn predict(&self, question: &str, doc: &ContextDoc) -> Result<SpanPrediction<f64>> {
        match self {
            ScorerHandle::Baseline(b) => b.model.predict_features(&b.features(question, doc), doc),
            ScorerHandle::External(e) => e.predict(question, doc),
        }
    }

    /// Predicted answer text for every sample of `ds`.
    pub fn predict_dataset(&self, ds: &Dataset) -> Result<HashMap<String, String>> {
        self.map_samples(ds.samples().iter().collect(), ds, |s, doc| {
            Ok(self.predict(&s.question, doc)?.answer_text)
        })
        .map(|m| m.into_iter().collect())
    }

    fn map_samples<R: Send>(
        &self,
        samples: Vec<&Sample>,
        ds: &Dataset,
        f: impl Fn(&Sample, &ContextDoc) -> Result<R> + Sync,
    ) -> Result<BTreeMap<String, R>> {
        let run = |s: &Sample| {
            let doc = ds.context(&s.doc_id).ok_or_else(|| Error::MissingInput {
                what: "context",
                sample_id: s.sample_id.clone(),
            })?;
            f(s, doc)
                .map(|r| (s.sample_id.clone(), r))
                .map_err(|e| Error::Sample {
                    sample_id: s.sample_id.clone(),
                    source: Box::new(e),
                })
        };
        match self {
            ScorerHandle::Baseline(_) => samples.into_par_iter().map(run).collect(),
            ScorerHandle::External(_) => samples.into_iter().map(run).collect(),
        }
    }
}

/// Predictions for the full question and for its first three words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolScore {
    pub full: SpanPrediction<f64>,
    pub truncated: SpanPrediction<f64>,
}

impl PoolScore {
    pub fn uncertainty(&self) -> f64 {
        self.full.uncertainty()
    }
}

/// Scores every sample of `pool` (each looked up in `ds`). The result does
/// not depend on the order of `pool`.
pub fn score_pool(handle: &ScorerHandle, pool: &[&Sample], ds: &Dataset) -> Result<BTreeMap<String, PoolScore>> {
    handle.map_samples(pool.to_vec(), ds, |s, doc| {
        Ok(PoolScore {
            full: handle.predict(&s.question, doc)?,
            truncated: handle.predict(&truncate_question(&s.question, DEFAULT_TRUNCATION_WORDS), doc)?,
        })
    })
}

/// How to obtain a scorer for each round of training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScorerConfig {
    Baseline {
        #[serde(default, flatten)]
        config: BaselineConfig,
    },
    External(ExternalConfig),
}

impl Default for ScorerConfig {
    fn default() -> Self {
        ScorerConfig::Baseline {
            config: BaselineConfig::default(),
        }
    }
}

/// Produces a retrained [`ScorerHandle`] from a labeled subset, once per
/// simulation iteration.
#[derive(Debug, Clone)]
pub enum Trainer {
    Baseline {
        config: BaselineConfig,
        cache: Arc<FeatureCache>,
    },
    External(Arc<ExternalScorer>),
}

impl Trainer {
    /// Baseline trainer whose cache covers every dataset in `datasets`.
    pub fn baseline(config: BaselineConfig, datasets: &[&Dataset]) -> Self {
        let mut cache = FeatureCache::new(config.features);
        for ds in datasets {
            cache.extend_with(ds);
        }
        Trainer::Baseline {
            config,
            cache: Arc::new(cache),
        }
    }

    pub fn from_config(config: &ScorerConfig, datasets: &[&Dataset]) -> Result<Self> {
        Ok(match config {
            ScorerConfig::Baseline { config } => Self::baseline(*config, datasets),
            ScorerConfig::External(ext) => {
                Trainer::External(Arc::new(ExternalScorer::spawn(ext.clone(), DEFAULT_MAX_SPAN_LEN)?))
            }
        })
    }

    /// Trains on the samples of `ds` accepted by `labeled`, taken in
    /// dataset order so the result does not depend on selection order.
    pub fn fit(&self, ds: &Dataset, labeled: impl Fn(&str) -> bool, seed: u64) -> Result<ScorerHandle> {
        let samples: Vec<&Sample> = ds.samples().iter().filter(|s| labeled(&s.sample_id)).collect();
        if samples.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        match self {
            Trainer::Baseline { config, cache } => {
                let examples: Vec<TrainingExample<f64>> = samples
                    .iter()
                    .map(|s| {
                        let answer = s.primary_answer();
                        TrainingExample {
                            features: cache.get_or_compute(&s.question, ds.context_of(s)),
                            token_start: answer.token_start,
                            token_end: answer.token_end,
                        }
                    })
                    .collect();
                let model = BaselineModel::fit(&examples, *config, seed)?;
                Ok(ScorerHandle::Baseline(BaselineScorer::with_cache(model, cache.clone())))
            }
            Trainer::External(scorer) => {
                let pairs: Vec<(&Sample, &ContextDoc)> = samples.iter().map(|s| (*s, &**ds.context_of(s))).collect();
                scorer.train(&pairs)?;
                Ok(ScorerHandle::External(scorer.clone()))
            }
        }
    }
}
