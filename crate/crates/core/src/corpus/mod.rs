//! Corpus data model: context documents, samples, datasets and the labeled /
//! unlabeled pool partition.

mod pool;
mod preprocess;
mod squad;
mod tokenize;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use pool::PoolState;
pub use preprocess::{
    dataset_stats, filter_long_answers, split_by_context, truncate_question, DatasetStats,
    SplitRatios, DEFAULT_MAX_ANSWER_TOKENS, DEFAULT_TRUNCATION_WORDS,
};
pub use squad::{
    load_squad_json, load_squad_json_as, parse_squad_str, save_squad_json, to_squad_json,
    DropReason, DroppedSample, LoadReport,
};
pub use tokenize::{is_punctuation, tokenize};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    /// Character (not byte) offset into the context.
    pub char_start: usize,
    /// Exclusive character offset.
    pub char_end: usize,
}

/// A tokenized context document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextDoc {
    pub doc_id: String,
    pub text: String,
    pub tokens: Vec<Token>,
    /// Byte offset of every character, plus a trailing `text.len()`.
    char_bytes: Vec<usize>,
}

impl ContextDoc {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        let mut char_bytes: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
        char_bytes.push(text.len());
        Self {
            doc_id: doc_id.into(),
            text,
            tokens,
            char_bytes,
        }
    }

    pub fn char_len(&self) -> usize {
        self.char_bytes.len() - 1
    }

    pub fn n_tokens(&self) -> usize {
        self.tokens.len()
    }

    /// Substring by character offsets; `None` when out of range.
    pub fn substring(&self, char_start: usize, char_end: usize) -> Option<&str> {
        if char_start > char_end || char_end > self.char_len() {
            return None;
        }
        Some(&self.text[self.char_bytes[char_start]..self.char_bytes[char_end]])
    }

    /// Character range `[start, end)` covered by an inclusive token span.
    pub fn token_span_chars(&self, token_start: usize, token_end: usize) -> Option<(usize, usize)> {
        if token_start > token_end || token_end >= self.tokens.len() {
            return None;
        }
        Some((
            self.tokens[token_start].char_start,
            self.tokens[token_end].char_end,
        ))
    }

    /// Context text covered by an inclusive token span.
    pub fn token_span_text(&self, token_start: usize, token_end: usize) -> Option<&str> {
        let (s, e) = self.token_span_chars(token_start, token_end)?;
        self.substring(s, e)
    }

    /// Smallest inclusive token span covering the character range
    /// `[char_start, char_end)`.
    pub fn tokens_covering(&self, char_start: usize, char_end: usize) -> Option<(usize, usize)> {
        let first = self
            .tokens
            .iter()
            .position(|t| t.char_end > char_start && t.char_start < char_end)?;
        let last = self
            .tokens
            .iter()
            .rposition(|t| t.char_start < char_end && t.char_end > char_start)?;
        Some((first, last))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerSpan {
    pub text: String,
    pub char_start: usize,
    pub token_start: usize,
    pub token_end: usize,
}

impl AnswerSpan {
    /// Anchors `text` at `char_start` in `doc`, checking that the context
    /// actually contains the answer there.
    pub fn locate(doc: &ContextDoc, text: &str, char_start: usize) -> Result<Self, DropReason> {
        let char_end = char_start + text.chars().count();
        match doc.substring(char_start, char_end) {
            Some(found) if found == text => {}
            _ => return Err(DropReason::OffsetMismatch),
        }
        let (token_start, token_end) = doc
            .tokens_covering(char_start, char_end)
            .ok_or(DropReason::NoTokens)?;
        Ok(Self {
            text: text.to_string(),
            char_start,
            token_start,
            token_end,
        })
    }

    pub fn n_tokens(&self) -> usize {
        self.token_end - self.token_start + 1
    }

    pub fn char_end(&self) -> usize {
        self.char_start + self.text.chars().count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub sample_id: String,
    pub question: String,
    pub doc_id: String,
    pub gold_answers: Vec<AnswerSpan>,
}

impl Sample {
    /// The first gold answer, used as the training target.
    pub fn primary_answer(&self) -> &AnswerSpan {
        &self.gold_answers[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Dev,
    Test,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Train => "train",
            Role::Dev => "dev",
            Role::Test => "test",
        })
    }
}

/// A named collection of contexts and the question samples asked over them.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub role: Role,
    contexts: IndexMap<String, Arc<ContextDoc>>,
    samples: Vec<Sample>,
    index: HashMap<String, usize>,
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.role == other.role
            && self.contexts == other.contexts
            && self.samples == other.samples
    }
}

impl Dataset {
    /// Builds a dataset, checking id uniqueness and doc references.
    pub fn new(
        name: impl Into<String>,
        role: Role,
        contexts: IndexMap<String, Arc<ContextDoc>>,
        samples: Vec<Sample>,
    ) -> Result<Self> {
        let mut index = HashMap::with_capacity(samples.len());
        for (i, sample) in samples.iter().enumerate() {
            if !contexts.contains_key(&sample.doc_id) {
                return Err(Error::Dataset(format!(
                    "sample {} refers to unknown context {}",
                    sample.sample_id, sample.doc_id
                )));
            }
            if sample.gold_answers.is_empty() {
                return Err(Error::Dataset(format!(
                    "sample {} has no gold answers",
                    sample.sample_id
                )));
            }
            if index.insert(sample.sample_id.clone(), i).is_some() {
                return Err(Error::Dataset(format!(
                    "duplicate sample id {}",
                    sample.sample_id
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            role,
            contexts,
            samples,
            index,
        })
    }

    pub fn empty(name: impl Into<String>, role: Role) -> Self {
        Self::new(name, role, IndexMap::new(), Vec::new()).expect("empty dataset is valid")
    }

    pub fn contexts(&self) -> &IndexMap<String, Arc<ContextDoc>> {
        &self.contexts
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn context(&self, doc_id: &str) -> Option<&Arc<ContextDoc>> {
        self.contexts.get(doc_id)
    }

    pub fn sample(&self, sample_id: &str) -> Option<&Sample> {
        self.index.get(sample_id).map(|&i| &self.samples[i])
    }

    /// Position of a sample in dataset order.
    pub fn position(&self, sample_id: &str) -> Option<usize> {
        self.index.get(sample_id).copied()
    }

    /// The context a sample is asked over.
    pub fn context_of(&self, sample: &Sample) -> &Arc<ContextDoc> {
        &self.contexts[&sample.doc_id]
    }

    /// Sample ids grouped by context, in context order then sample order.
    pub fn samples_by_context(&self) -> IndexMap<&str, Vec<&Sample>> {
        let mut groups: IndexMap<&str, Vec<&Sample>> = self
            .contexts
            .keys()
            .map(|k| (k.as_str(), Vec::new()))
            .collect();
        for sample in &self.samples {
            groups
                .get_mut(sample.doc_id.as_str())
                .expect("doc ids validated on construction")
                .push(sample);
        }
        groups
    }

    /// Keeps the contexts and the samples satisfying `keep`.
    pub fn retain_samples(&self, mut keep: impl FnMut(&Sample) -> bool) -> Self {
        let samples = self.samples.iter().filter(|s| keep(s)).cloned().collect();
        Self::new(self.name.clone(), self.role, self.contexts.clone(), samples)
            .expect("subset of a valid dataset is valid")
    }

    /// Samples in dataset order whose ids satisfy `keep`.
    pub fn select<'a>(&'a self, mut keep: impl FnMut(&str) -> bool + 'a) -> impl Iterator<Item = &'a Sample> + 'a {
        self.samples.iter().filter(move |s| keep(&s.sample_id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_doc() -> ContextDoc {
        ContextDoc::new("d", "Caf\u{e9} au lait, s'il vous pla\u{ee}t.")
    }

    #[test]
    fn token_offsets_round_trip_with_multibyte_text() {
        let doc = one_doc();
        for t in &doc.tokens {
            assert_eq!(doc.substring(t.char_start, t.char_end), Some(t.text.as_str()));
        }
    }

    #[test]
    fn locate_answer_uses_character_offsets() {
        let doc = one_doc();
        let span = AnswerSpan::locate(&doc, "au lait", 5).unwrap();
        assert_eq!((span.token_start, span.token_end), (1, 2));
        assert_eq!(doc.token_span_text(1, 2), Some("au lait"));
        assert_eq!(AnswerSpan::locate(&doc, "au lait", 4), Err(DropReason::OffsetMismatch));
    }

    #[test]
    fn partial_token_answer_is_covered_by_whole_token() {
        let doc = ContextDoc::new("d", "in 1990s now");
        let span = AnswerSpan::locate(&doc, "1990", 3).unwrap();
        assert_eq!((span.token_start, span.token_end), (1, 1));
    }

    #[test]
    fn whitespace_answer_has_no_tokens() {
        let doc = ContextDoc::new("d", "a  b");
        assert_eq!(AnswerSpan::locate(&doc, " ", 1), Err(DropReason::NoTokens));
    }

    #[test]
    fn dataset_rejects_dangling_doc_and_duplicates() {
        let doc = Arc::new(ContextDoc::new("d", "x y"));
        let ans = AnswerSpan::locate(&doc, "x", 0).unwrap();
        let sample = |id: &str, doc_id: &str| Sample {
            sample_id: id.into(),
            question: "q".into(),
            doc_id: doc_id.into(),
            gold_answers: vec![ans.clone()],
        };
        let contexts: IndexMap<_, _> = [("d".to_string(), doc.clone())].into_iter().collect();
        assert!(Dataset::new("n", Role::Train, contexts.clone(), vec![sample("a", "zz")]).is_err());
        assert!(Dataset::new("n", Role::Train, contexts.clone(), vec![sample("a", "d"), sample("a", "d")]).is_err());
        let ds = Dataset::new("n", Role::Train, contexts, vec![sample("a", "d")]).unwrap();
        assert_eq!(ds.position("a"), Some(0));
    }
}
