//! Handcrafted per-token features for the baseline span model.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{is_punctuation, tokenize, ContextDoc};
use crate::Scalar;

/// Bumped whenever the feature list or a feature definition changes.
pub const FEATURE_VERSION: u32 = 1;

pub const FEATURE_NAMES: [&str; 13] = [
    "exact_match",
    "lowercase_match",
    "window_overlap",
    "idf_window_overlap",
    "left_window_overlap",
    "right_window_overlap",
    "relative_position",
    "token_length",
    "is_capitalized",
    "is_numeric",
    "is_punctuation",
    "person_question_x_capitalized",
    "quantity_question_x_numeric",
];

pub const N_FEATURES: usize = FEATURE_NAMES.len();

const PERSON_CUES: [&str; 4] = ["who", "whom", "whose", "person"];
const QUANTITY_CUES: [&str; 5] = ["when", "year", "date", "many", "much"];
const MAX_TOKEN_CHARS: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Half-width of the question-overlap window, in tokens.
    pub window: usize,
    pub version: u32,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            window: 3,
            version: FEATURE_VERSION,
        }
    }
}

/// Row-major `n_tokens x n_features` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    n_tokens: usize,
    data: Vec<T>,
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn from_rows(rows: &[[T; N_FEATURES]]) -> Self {
        Self {
            n_tokens: rows.len(),
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn n_tokens(&self) -> usize {
        self.n_tokens
    }

    pub fn n_features(&self) -> usize {
        N_FEATURES
    }

    pub fn row(&self, token: usize) -> &[T] {
        &self.data[token * N_FEATURES..(token + 1) * N_FEATURES]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(N_FEATURES)
    }

    /// `X w`: one score per token.
    pub fn scores(&self, weights: &[T]) -> Vec<T> {
        self.rows()
            .map(|row| row.iter().zip(weights).map(|(&x, &w)| x * w).sum())
            .collect()
    }
}

fn is_capitalized(text: &str) -> bool {
    text.chars().next().is_some_and(char::is_uppercase)
}

fn is_numeric(text: &str) -> bool {
    !text.is_empty() && text.chars().all(|c| c.is_ascii_digit())
}

/// Per-token features of `doc` with respect to `question`. See
/// [`FEATURE_NAMES`] for the column order.
pub fn featurize<T: Scalar>(question: &str, doc: &ContextDoc, config: FeatureConfig) -> FeatureMatrix<T> {
    let q_tokens: Vec<String> = tokenize(question)
        .into_iter()
        .map(|t| t.text)
        .filter(|t| !t.chars().all(is_punctuation))
        .collect();
    let q_exact: Vec<&str> = q_tokens.iter().map(String::as_str).collect();
    let mut q_terms: Vec<String> = q_tokens.iter().map(|t| t.to_lowercase()).collect();
    q_terms.sort();
    q_terms.dedup();
    let asks_person = q_terms.iter().any(|t| PERSON_CUES.contains(&t.as_str()));
    let asks_quantity = q_terms.iter().any(|t| QUANTITY_CUES.contains(&t.as_str()));

    let n = doc.n_tokens();
    let lower: Vec<String> = doc.tokens.iter().map(|t| t.text.to_lowercase()).collect();
    let mut tf: HashMap<&str, usize> = HashMap::new();
    for t in &lower {
        *tf.entry(t.as_str()).or_default() += 1;
    }
    let idf = |term: &str| (1.0 + n as f64 / (1.0 + *tf.get(term).unwrap_or(&0) as f64)).ln();
    let term_idf: Vec<f64> = q_terms.iter().map(|t| idf(t)).collect();
    let idf_total: f64 = term_idf.iter().sum();
    // Index into q_terms for every doc token, if any.
    let term_of: Vec<Option<usize>> = lower
        .iter()
        .map(|t| q_terms.binary_search(t).ok())
        .collect();

    let nq = q_terms.len() as f64;
    let w = config.window;
    let mut seen = vec![false; q_terms.len()];
    let mut overlap = |lo: usize, hi: usize| -> (f64, f64) {
        seen.iter_mut().for_each(|s| *s = false);
        let (mut count, mut weight) = (0.0, 0.0);
        for j in lo..hi {
            if let Some(k) = term_of[j] {
                if !seen[k] {
                    seen[k] = true;
                    count += 1.0;
                    weight += term_idf[k];
                }
            }
        }
        if nq == 0.0 {
            (0.0, 0.0)
        } else {
            (count / nq, if idf_total > 0.0 { weight / idf_total } else { 0.0 })
        }
    };

    let mut data = Vec::with_capacity(n * N_FEATURES);
    for (i, token) in doc.tokens.iter().enumerate() {
        let (window, idf_window) = overlap(i.saturating_sub(w), (i + w + 1).min(n));
        let (left, _) = overlap(i.saturating_sub(w), i);
        let (right, _) = overlap(i + 1, (i + w + 1).min(n));
        let cap = is_capitalized(&token.text);
        let num = is_numeric(&token.text);
        let row = [
            f64::from(u8::from(q_exact.contains(&token.text.as_str()))),
            f64::from(u8::from(term_of[i].is_some())),
            window,
            idf_window,
            left,
            right,
            if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 },
            (token.text.chars().count() as f64).min(MAX_TOKEN_CHARS) / MAX_TOKEN_CHARS,
            f64::from(u8::from(cap)),
            f64::from(u8::from(num)),
            f64::from(u8::from(token.text.chars().all(is_punctuation))),
            f64::from(u8::from(asks_person && cap)),
            f64::from(u8::from(asks_quantity && num)),
        ];
        data.extend(row.iter().map(|&v| T::of(v)));
    }
    FeatureMatrix { n_tokens: n, data }
}
