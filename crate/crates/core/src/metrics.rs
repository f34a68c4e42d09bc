//! Exact Match and token-level F1 with SQuAD-style answer normalization.
//!
//! Both metrics take the maximum over all gold answers of a sample, and
//! [`evaluate`] reports them as percentages.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{is_punctuation, Dataset};
use crate::fsutil;
use crate::{Error, Result};

const ARTICLES: [&str; 3] = ["a", "an", "the"];

/// Lowercase, strip punctuation, drop the articles `a`/`an`/`the`, and
/// collapse whitespace.
pub fn normalize_answer(text: &str) -> String {
    let stripped: String = text
        .to_lowercase()
        .chars()
        .filter(|c| !is_punctuation(*c))
        .collect();
    stripped
        .split_whitespace()
        .filter(|w| !ARTICLES.contains(w))
        .collect::<Vec<_>>()
        .join(" ")
}

/// 1 if the prediction matches any gold after normalization, else 0.
pub fn exact_match<S: AsRef<str>>(prediction: &str, golds: &[S]) -> u8 {
    let pred = normalize_answer(prediction);
    u8::from(golds.iter().any(|g| normalize_answer(g.as_ref()) == pred))
}

fn f1_single(pred_tokens: &[&str], gold_tokens: &[&str]) -> f64 {
    if pred_tokens.is_empty() || gold_tokens.is_empty() {
        return if pred_tokens.is_empty() && gold_tokens.is_empty() { 1.0 } else { 0.0 };
    }
    let mut counts: HashMap<&str, isize> = HashMap::new();
    for t in gold_tokens {
        *counts.entry(t).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in pred_tokens {
        if let Some(c) = counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / pred_tokens.len() as f64;
    let recall = overlap as f64 / gold_tokens.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Multiset token-overlap F1 in `[0, 1]`, maximized over golds.
pub fn token_f1<S: AsRef<str>>(prediction: &str, golds: &[S]) -> f64 {
    let pred = normalize_answer(prediction);
    let pred_tokens: Vec<&str> = pred.split_whitespace().collect();
    golds
        .iter()
        .map(|g| {
            let gold = normalize_answer(g.as_ref());
            let gold_tokens: Vec<&str> = gold.split_whitespace().collect();
            f1_single(&pred_tokens, &gold_tokens)
        })
        .fold(0.0, f64::max)
}

/// Aggregate scores over a dataset, both scaled to `[0, 100]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalResult {
    pub exact_match: f64,
    pub f1: f64,
    pub n_samples: usize,
}

impl EvalResult {
    /// Point-wise mean of several results over the same evaluation set.
    pub fn mean(results: &[EvalResult]) -> EvalResult {
        if results.is_empty() {
            return EvalResult::default();
        }
        let n = results.len() as f64;
        EvalResult {
            exact_match: results.iter().map(|r| r.exact_match).sum::<f64>() / n,
            f1: results.iter().map(|r| r.f1).sum::<f64>() / n,
            n_samples: results[0].n_samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub result: EvalResult,
    /// Samples without a prediction; each scored 0.
    pub missing: Vec<String>,
}

/// Anything that maps a sample id to a predicted answer string.
pub trait PredictionLookup {
    fn prediction(&self, sample_id: &str) -> Option<&str>;
}

impl PredictionLookup for HashMap<String, String> {
    fn prediction(&self, sample_id: &str) -> Option<&str> {
        self.get(sample_id).map(String::as_str)
    }
}

impl PredictionLookup for BTreeMap<String, String> {
    fn prediction(&self, sample_id: &str) -> Option<&str> {
        self.get(sample_id).map(String::as_str)
    }
}

pub fn evaluate(predictions: &impl PredictionLookup, ds: &Dataset) -> Evaluation {
    let mut em_total = 0.0;
    let mut f1_total = 0.0;
    let mut missing = Vec::new();
    for sample in ds.samples() {
        let Some(pred) = predictions.prediction(&sample.sample_id) else {
            missing.push(sample.sample_id.clone());
            continue;
        };
        let golds: Vec<&str> = sample.gold_answers.iter().map(|a| a.text.as_str()).collect();
        em_total += f64::from(exact_match(pred, &golds));
        f1_total += token_f1(pred, &golds);
    }
    let n = ds.len();
    let scale = if n == 0 { 0.0 } else { 100.0 / n as f64 };
    Evaluation {
        result: EvalResult {
            exact_match: em_total * scale,
            f1: f1_total * scale,
            n_samples: n,
        },
        missing,
    }
}

/// Reads a JSON object mapping sample id to answer string.
pub fn load_predictions(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    let path = path.as_ref();
    let text = fsutil::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        source_name: path.display().to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub fn save_predictions(predictions: &BTreeMap<String, String>, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(predictions).expect("string map serializes");
    fsutil::write_atomic(path.as_ref(), text.as_bytes())
}
