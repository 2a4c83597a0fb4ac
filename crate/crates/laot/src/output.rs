//! Result files: training logs, reports and aggregate tables.

use std::fs;
use std::path::Path;

use laot_core::evaluation::EvalReport;
use laot_core::laot::TrainLog;
use serde::Serialize;

use crate::error::{Error, Result};

fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::invalid(format!("{}: {e}", path.display()))
}

/// `epoch,step,l_rec,l_la,total,grad_norm`; `l_la` is empty on steps where
/// the alignment term was skipped.
pub fn write_train_log(path: &Path, log: &TrainLog) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["epoch", "step", "l_rec", "l_la", "total", "grad_norm"])
        .map_err(|e| csv_error(path, e))?;
    for s in &log.steps {
        w.write_record([
            s.epoch.to_string(),
            s.step.to_string(),
            fmt_f64(s.l_rec),
            s.l_la.map(fmt_f64).unwrap_or_default(),
            fmt_f64(s.total),
            fmt_f64(s.grad_norm),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// One row of the aggregate accuracy table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub task: String,
    pub method: String,
    pub seed: u64,
    pub accuracy: f64,
    pub runtime_seconds: f64,
    pub config_hash: String,
}

impl AggregateRow {
    pub fn new(task: &str, seed: u64, report: &EvalReport, config_hash: &str) -> Self {
        Self {
            task: task.into(),
            method: report.method_tag.clone(),
            seed,
            accuracy: report.accuracy,
            runtime_seconds: report.runtime_seconds,
            config_hash: config_hash.into(),
        }
    }
}

/// Serializes rows with a header taken from the field names.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
