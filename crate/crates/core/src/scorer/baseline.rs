//! Linear-softmax span model trained by full-batch gradient descent.
//!
//! Two independent heads score every token, one for the answer start and
//! one for the answer end: `p = softmax(X w)`, trained on the mean
//! cross-entropy of the gold index with weights starting at zero.

use std::path::Path;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::features::{featurize, FeatureConfig, FeatureMatrix, FEATURE_VERSION, N_FEATURES};
use super::math::softmax;
use super::prediction::SpanPrediction;
use crate::corpus::{ContextDoc, Sample};
use crate::fsutil::{read_to_string, write_atomic};
use crate::{Error, Result, Scalar};

pub const DEFAULT_MAX_SPAN_LEN: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub features: FeatureConfig,
    pub max_span_len: usize,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            features: FeatureConfig::default(),
            max_span_len: DEFAULT_MAX_SPAN_LEN,
            epochs: 120,
            learning_rate: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel<T> {
    pub start_weights: Vec<T>,
    pub end_weights: Vec<T>,
    pub config: BaselineConfig,
    pub seed: u64,
}

/// One training instance: a feature matrix and its gold token index.
pub type HeadExample<'a, T> = (&'a FeatureMatrix<T>, usize);

/// Mean cross-entropy of one head and its gradient with respect to
/// `weights`.
pub fn loss_and_gradient<T: Scalar>(weights: &[T], examples: &[HeadExample<'_, T>]) -> (T, Vec<T>) {
    let mut loss = T::zero();
    let mut grad = vec![T::zero(); weights.len()];
    let mut exps: Vec<T> = Vec::new();
    for (features, gold) in examples {
        exps.clear();
        exps.extend(features.rows().map(|row| dot(row, weights)));
        let gold_score = exps[*gold];
        let max = exps.iter().copied().fold(T::neg_infinity(), T::max);
        let mut total = T::zero();
        for e in exps.iter_mut() {
            *e = (*e - max).exp();
            total += *e;
        }
        loss += total.ln() + max - gold_score;
        for (j, (row, e)) in features.rows().zip(&exps).enumerate() {
            let p = *e / total;
            let residual = if j == *gold { p - T::one() } else { p };
            for (g, &x) in grad.iter_mut().zip(row) {
                *g += residual * x;
            }
        }
    }
    let n = T::of_usize(examples.len().max(1));
    grad.iter_mut().for_each(|g| *g /= n);
    (loss / n, grad)
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn descend<T: Scalar>(examples: &[HeadExample<'_, T>], config: &BaselineConfig) -> Vec<T> {
    let lr = T::of(config.learning_rate);
    let mut weights = vec![T::zero(); N_FEATURES];
    for _ in 0..config.epochs {
        let (_, grad) = loss_and_gradient(&weights, examples);
        for (w, g) in weights.iter_mut().zip(&grad) {
            *w -= lr * *g;
        }
    }
    weights
}

/// A featurized training sample: gold start and end token indices.
#[derive(Debug, Clone)]
pub struct TrainingExample<T> {
    pub features: Arc<FeatureMatrix<T>>,
    pub token_start: usize,
    pub token_end: usize,
}

impl<T: Scalar> BaselineModel<T> {
    /// Trains both heads. Result depends only on the example order, the
    /// config and the seed.
    pub fn fit(examples: &[TrainingExample<T>], config: BaselineConfig, seed: u64) -> Result<Self> {
        if examples.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let starts: Vec<HeadExample<'_, T>> = examples.iter().map(|e| (&*e.features, e.token_start)).collect();
        let ends: Vec<HeadExample<'_, T>> = examples.iter().map(|e| (&*e.features, e.token_end)).collect();
        Ok(Self {
            start_weights: descend(&starts, &config),
            end_weights: descend(&ends, &config),
            config,
            seed,
        })
    }

    pub fn predict_features(&self, features: &FeatureMatrix<T>, doc: &ContextDoc) -> Result<SpanPrediction<T>> {
        if features.n_tokens() == 0 {
            return Err(Error::Shape(format!("context {} has no tokens", doc.doc_id)));
        }
        let start = softmax(&features.scores(&self.start_weights));
        let end = softmax(&features.scores(&self.end_weights));
        SpanPrediction::from_distributions(start, end, doc, self.config.max_span_len)
    }

    pub fn predict(&self, question: &str, doc: &ContextDoc) -> Result<SpanPrediction<T>> {
        self.predict_features(&featurize(question, doc, self.config.features), doc)
    }
}

impl BaselineModel<f64> {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        bytes.push(b'\n');
        write_atomic(path.as_ref(), &bytes)
    }

    /// Rejects models whose feature layout differs from this build.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = read_to_string(path)?;
        let model: Self = serde_json::from_str(&text).map_err(|e| Error::Parse {
            source_name: path.display().to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if model.config.features.version != FEATURE_VERSION {
            return Err(Error::Config(format!(
                "{}: model uses feature version {}, this build uses {FEATURE_VERSION}",
                path.display(),
                model.config.features.version
            )));
        }
        if model.start_weights.len() != N_FEATURES || model.end_weights.len() != N_FEATURES {
            return Err(Error::Shape(format!("{}: expected {N_FEATURES} weights per head", path.display())));
        }
        Ok(model)
    }
}

/// Featurizes `samples` against their contexts and trains a model on the
/// first gold answer of each.
pub fn train_baseline<T: Scalar>(
    samples: &[&Sample],
    contexts: &IndexMap<String, Arc<ContextDoc>>,
    config: BaselineConfig,
    seed: u64,
) -> Result<BaselineModel<T>> {
    let examples = samples
        .iter()
        .map(|s| {
            let doc = contexts.get(&s.doc_id).ok_or_else(|| Error::MissingInput {
                what: "context",
                sample_id: s.sample_id.clone(),
            })?;
            let answer = s.primary_answer();
            Ok(TrainingExample {
                features: Arc::new(featurize(&s.question, doc, config.features)),
                token_start: answer.token_start,
                token_end: answer.token_end,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    BaselineModel::fit(&examples, config, seed)
}
