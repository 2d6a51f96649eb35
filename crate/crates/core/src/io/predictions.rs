//! Prediction files and evaluation report records.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::data::{Label, Segmentation};
use crate::error::{Error, Result};
use crate::eval::EvalReport;

pub const PREDICTIONS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub video_id: String,
    pub task_id: String,
    pub segmentation: Segmentation<Label>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionFile {
    pub version: u32,
    pub system: String,
    pub videos: Vec<PredictionRecord>,
}

impl PredictionFile {
    pub fn new(system: impl Into<String>, videos: Vec<PredictionRecord>) -> Self {
        PredictionFile {
            version: PREDICTIONS_VERSION,
            system: system.into(),
            videos,
        }
    }

    pub fn by_video(&self) -> BTreeMap<&str, &PredictionRecord> {
        self.videos.iter().map(|r| (r.video_id.as_str(), r)).collect()
    }
}

pub fn save_predictions(file: &PredictionFile, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(file).expect("predictions serialize");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_predictions(path: &Path) -> Result<PredictionFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: PredictionFile = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
    if file.version != PREDICTIONS_VERSION {
        return Err(Error::Version {
            path: path.display().to_string(),
            found: file.version,
            expected: PREDICTIONS_VERSION,
        });
    }
    Ok(file)
}

/// Run metadata attached to every report record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub version: String,
    pub seed: Option<u64>,
    pub config_sha256: String,
}

impl RunMetadata {
    pub fn new(seed: Option<u64>, config: &impl Serialize) -> Self {
        let bytes = serde_json::to_vec(config).expect("config serializes");
        RunMetadata {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config_sha256: crate::io::model::sha256_hex(&bytes),
        }
    }
}

/// One record per task, then one for the average.
pub fn report_records(report: &EvalReport, meta: &RunMetadata) -> Vec<Value> {
    let mut out = Vec::with_capacity(report.tasks.len() + 1);
    for row in &report.tasks {
        out.push(json!({
            "scope": "task",
            "task": row.task_id,
            "videos": row.videos,
            "metrics": row.metrics,
            "meta": meta,
        }));
    }
    out.push(json!({
        "scope": "average",
        "tasks": report.tasks.len(),
        "excluded_tasks": report.excluded_tasks,
        "metrics": report.average,
        "meta": meta,
    }));
    out
}

/// Writes JSON lines to `path` and the text table next to it with a `.txt`
/// extension.
pub fn write_report(report: &EvalReport, meta: &RunMetadata, path: &Path) -> Result<()> {
    let lines: Vec<String> = report_records(report, meta).iter().map(|v| v.to_string()).collect();
    fs::write(path, lines.join("\n") + "\n").map_err(|e| Error::io(path, e))?;
    let table = path.with_extension("txt");
    fs::write(&table, report.to_string()).map_err(|e| Error::io(&table, e))
}

pub fn read_report_records(path: &Path) -> Result<Vec<Value>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| Error::parse(path, e)))
        .collect()
}
