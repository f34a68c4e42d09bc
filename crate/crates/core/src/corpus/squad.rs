//! SQuAD-format JSON ingestion and serialization.

use std::path::Path;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{AnswerSpan, ContextDoc, Dataset, Role, Sample};
use crate::fsutil;
use crate::{Error, Result};

#[derive(Debug, Deserialize, Serialize)]
struct SquadFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    version: Option<String>,
    data: Vec<SquadArticle>,
}

#[derive(Debug, Deserialize, Serialize)]
struct SquadArticle {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    title: Option<String>,
    paragraphs: Vec<SquadParagraph>,
}

#[derive(Debug, Deserialize, Serialize)]
struct SquadParagraph {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    context: String,
    qas: Vec<SquadQa>,
}

#[derive(Debug, Deserialize, Serialize)]
struct SquadQa {
    id: String,
    question: String,
    answers: Vec<SquadAnswer>,
}

#[derive(Debug, Deserialize, Serialize)]
struct SquadAnswer {
    text: String,
    answer_start: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    /// `answer_start` does not point at the answer text.
    OffsetMismatch,
    /// The answer covers no token (empty or whitespace-only).
    NoTokens,
    /// The qa entry has no answers at all.
    NoAnswers,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DroppedSample {
    pub sample_id: String,
    pub reason: DropReason,
}

/// A loaded dataset together with the samples rejected during validation.
#[derive(Debug, Clone)]
pub struct LoadReport {
    pub dataset: Dataset,
    pub dropped: Vec<DroppedSample>,
}

/// Loads a SQuAD-format file; the dataset is named after the file stem.
pub fn load_squad_json(path: impl AsRef<Path>) -> Result<LoadReport> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    load_squad_json_as(path, &name, Role::Train)
}

pub fn load_squad_json_as(path: impl AsRef<Path>, name: &str, role: Role) -> Result<LoadReport> {
    let path = path.as_ref();
    let text = fsutil::read_to_string(path)?;
    parse_squad_str(&text, &path.display().to_string(), name, role)
}

/// Parses SQuAD JSON text. Structural problems reject the whole input;
/// answers that do not match their offsets drop only their sample.
pub fn parse_squad_str(text: &str, source_name: &str, name: &str, role: Role) -> Result<LoadReport> {
    let file: SquadFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        source_name: source_name.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    let mut contexts = IndexMap::new();
    let mut samples = Vec::new();
    let mut dropped = Vec::new();
    for (ai, article) in file.data.into_iter().enumerate() {
        for (pi, paragraph) in article.paragraphs.into_iter().enumerate() {
            let doc_id = paragraph
                .id
                .unwrap_or_else(|| format!("{name}:{ai}:{pi}"));
            if contexts.contains_key(&doc_id) {
                return Err(Error::Dataset(format!("duplicate context id {doc_id}")));
            }
            let doc = Arc::new(ContextDoc::new(doc_id.clone(), paragraph.context));
            for qa in paragraph.qas {
                match locate_answers(&doc, &qa.answers) {
                    Ok(gold_answers) => samples.push(Sample {
                        sample_id: qa.id,
                        question: qa.question,
                        doc_id: doc_id.clone(),
                        gold_answers,
                    }),
                    Err(reason) => {
                        log::debug!("dropping sample {} ({reason:?})", qa.id);
                        dropped.push(DroppedSample {
                            sample_id: qa.id,
                            reason,
                        });
                    }
                }
            }
            contexts.insert(doc_id, doc);
        }
    }
    let dataset = Dataset::new(name, role, contexts, samples)?;
    Ok(LoadReport { dataset, dropped })
}

fn locate_answers(doc: &ContextDoc, answers: &[SquadAnswer]) -> Result<Vec<AnswerSpan>, DropReason> {
    if answers.is_empty() {
        return Err(DropReason::NoAnswers);
    }
    answers
        .iter()
        .map(|a| AnswerSpan::locate(doc, &a.text, a.answer_start))
        .collect()
}

/// Serializes a dataset back to SQuAD JSON. Every context becomes its own
/// paragraph carrying an explicit `id`, so reloading reproduces doc ids.
pub fn to_squad_json(ds: &Dataset) -> String {
    let groups = ds.samples_by_context();
    let data = ds
        .contexts()
        .iter()
        .map(|(doc_id, doc)| SquadArticle {
            title: None,
            paragraphs: vec![SquadParagraph {
                id: Some(doc_id.clone()),
                context: doc.text.clone(),
                qas: groups[doc_id.as_str()]
                    .iter()
                    .map(|s| SquadQa {
                        id: s.sample_id.clone(),
                        question: s.question.clone(),
                        answers: s
                            .gold_answers
                            .iter()
                            .map(|a| SquadAnswer {
                                text: a.text.clone(),
                                answer_start: a.char_start,
                            })
                            .collect(),
                    })
                    .collect(),
            }],
        })
        .collect();
    let file = SquadFile {
        version: Some("1.1".to_string()),
        data,
    };
    serde_json::to_string_pretty(&file).expect("SQuAD structs serialize")
}

pub fn save_squad_json(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    fsutil::write_atomic(path.as_ref(), to_squad_json(ds).as_bytes())
}
