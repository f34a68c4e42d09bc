use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::{Difficulty, SelectionBatch};
use crate::corpus::Dataset;
use crate::fsutil;
use crate::Result;

/// One line of an annotation worklist.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorklistRow {
    pub rank: usize,
    pub sample_id: String,
    pub doc_id: String,
    pub strategy: String,
    pub score: Option<f64>,
    pub difficulty_label: Option<Difficulty>,
}

pub fn worklist_rows(batch: &SelectionBatch, ds: &Dataset) -> Vec<WorklistRow> {
    let strategy = batch.strategy.to_string();
    batch
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| WorklistRow {
            rank: i + 1,
            sample_id: id.clone(),
            doc_id: ds.sample(id).map(|s| s.doc_id.clone()).unwrap_or_default(),
            strategy: strategy.clone(),
            score: batch.scores.as_ref().and_then(|s| s.get(id).copied()),
            difficulty_label: batch.labels.as_ref().and_then(|l| l.get(id).copied()),
        })
        .collect()
}

/// CSV with header `rank,sample_id,doc_id,strategy,score,difficulty_label`.
pub fn write_worklist_csv(rows: &[WorklistRow], out: impl Write) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    if rows.is_empty() {
        writer.write_record(["rank", "sample_id", "doc_id", "strategy", "score", "difficulty_label"])?;
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn save_worklist_csv(rows: &[WorklistRow], path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_worklist_csv(rows, &mut buf)?;
    fsutil::write_atomic(path.as_ref(), &buf)
}
