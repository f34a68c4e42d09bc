use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{CurvePoint, LearningCurve, SaturationReport};
use crate::fsutil::{read_to_string, write_atomic};
use crate::{Error, Result};

const CSV_HEADER: [&str; 10] = [
    "kind",
    "seed",
    "iteration",
    "labeled_count",
    "labeled_fraction",
    "eval_set",
    "generalization",
    "exact_match",
    "f1",
    "n_samples",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportPaths {
    pub curve_csv: PathBuf,
    pub curve_json: PathBuf,
    pub saturation_json: PathBuf,
}

fn write_points<W: Write>(
    out: &mut csv::Writer<W>,
    curve: &LearningCurve,
    kind: &str,
    seed: Option<u64>,
    points: &[CurvePoint],
) -> Result<()> {
    let seed = seed.map(|s| s.to_string()).unwrap_or_default();
    for p in points {
        for (name, generalization) in curve.eval_sets() {
            let Some(r) = p.scores.get(&name) else { continue };
            out.write_record([
                kind,
                &seed,
                &p.iteration.to_string(),
                &p.labeled_count.to_string(),
                &p.labeled_fraction.to_string(),
                &name,
                &generalization.to_string(),
                &r.exact_match.to_string(),
                &r.f1.to_string(),
                &r.n_samples.to_string(),
            ])?;
        }
    }
    Ok(())
}

/// One row per seed, iteration and evaluation set, then the seed means.
pub fn write_curve_csv(curve: &LearningCurve, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for s in &curve.per_seed {
        write_points(&mut w, curve, "seed", Some(s.seed), &s.points)?;
    }
    write_points(&mut w, curve, "mean", None, &curve.points)?;
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

fn to_json(value: &impl Serialize) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes `<stem>.csv`, `<stem>.json` and `<stem>.saturation.json` into
/// `dir`, each atomically.
pub fn export_report(curve: &LearningCurve, report: &SaturationReport, dir: impl AsRef<Path>, stem: &str) -> Result<ExportPaths> {
    let dir = dir.as_ref();
    let paths = ExportPaths {
        curve_csv: dir.join(format!("{stem}.csv")),
        curve_json: dir.join(format!("{stem}.json")),
        saturation_json: dir.join(format!("{stem}.saturation.json")),
    };
    let mut csv_bytes = Vec::new();
    write_curve_csv(curve, &mut csv_bytes)?;
    write_atomic(&paths.curve_csv, &csv_bytes)?;
    write_atomic(&paths.curve_json, &to_json(curve)?)?;
    write_atomic(&paths.saturation_json, &to_json(report)?)?;
    Ok(paths)
}

pub fn load_learning_curve(path: impl AsRef<Path>) -> Result<LearningCurve> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        source_name: path.display().to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}
