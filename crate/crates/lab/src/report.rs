//! Report documents and the files written for them.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::error::{LabError, LabResult};
use crate::svg::Plot;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    /// Every computation finished and its verdicts agree.
    Ok,
    /// The cohomological equation has no solution; reported, not an error.
    Obstructed,
    /// Equivalent criteria disagree.
    Inconsistent,
}

pub struct Table {
    pub name: &'static str,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(name: &'static str, header: &[S]) -> Self {
        Table { name, header: header.iter().map(|h| h.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push<I: IntoIterator<Item = String>>(&mut self, row: I) {
        let row: Vec<String> = row.into_iter().collect();
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

pub struct Report {
    pub command: &'static str,
    pub status: Status,
    pub result: Value,
    pub tables: Vec<Table>,
    pub figures: Vec<(&'static str, Plot)>,
}

impl Report {
    pub fn new(command: &'static str, result: Value) -> Self {
        Report { command, status: Status::Ok, result, tables: Vec::new(), figures: Vec::new() }
    }
}

/// Shortest round-trip representation, as used in every CSV cell.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

/// Description of the map shared by every report.
pub fn map_header(cfg: &ExperimentConfig, f: &anosov_core::ToralMap) -> Value {
    json!({
        "id": cfg.name,
        "kind": f.kind_name(),
        "dim": f.dim(),
        "degree": f.degree(),
        "model": to_value(f.model()),
        "kappa": f.kappa(),
    })
}

pub fn document(cfg: &ExperimentConfig, map: &Value, report: &Report) -> Value {
    json!({
        "command": report.command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": to_value(cfg),
        "map": map,
        "status": report.status,
        "result": report.result,
    })
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> LabResult<()> {
    std::fs::write(path, bytes).map_err(|e| LabError::io(path, e))
}

pub fn write_json(path: &Path, value: &Value) -> LabResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("json");
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

fn write_csv(path: &Path, table: &Table) -> LabResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(&table.header).map_err(|e| csv_io(path, e))?;
    for row in &table.rows {
        w.write_record(row).map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| LabError::io(path, e))
}

fn csv_io(path: &Path, e: csv::Error) -> LabError {
    LabError::io(path, std::io::Error::other(e))
}

/// Writes `<command>.json`, `<command>_<table>.csv` and
/// `<command>_<figure>.svg` as the output options ask, and returns the
/// paths written.
pub fn write_report(dir: &Path, cfg: &ExperimentConfig, map: &Value, report: &Report) -> LabResult<Vec<PathBuf>> {
    let mut written = Vec::new();
    if cfg.output.format.json() {
        let p = dir.join(format!("{}.json", report.command));
        write_json(&p, &document(cfg, map, report))?;
        written.push(p);
    }
    if cfg.output.format.csv() {
        for t in &report.tables {
            let p = dir.join(format!("{}_{}.csv", report.command, t.name));
            write_csv(&p, t)?;
            written.push(p);
        }
    }
    if cfg.output.svg {
        for (name, plot) in &report.figures {
            let p = dir.join(format!("{}_{}.svg", report.command, name));
            write_bytes(&p, plot.render().as_bytes())?;
            written.push(p);
        }
    }
    Ok(written)
}
