//! Command-line front end: configs in, reports and tables out.
//!
//! Exit codes: 0 when every check passes, 1 when a numerical check fails, 2 for an
//! invalid config or argument.

mod config;
mod run;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub use config::*;
pub use run::execute;

use crate::kernels::oracle::OracleGridConfig;
use crate::operator::{GroupRef, OperatorSpec};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("run failed: {0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

/// A JSON error with its line and column.
pub fn located(what: &str, e: &serde_json::Error) -> String {
    let msg = e.to_string();
    let msg = msg.rsplit_once(" at line ").map_or(msg.as_str(), |(m, _)| m).to_string();
    format!("{what} JSON, line {}, column {}: {msg}", e.line(), e.column())
}

/// `name`, inline JSON, or `@path` to a JSON file.
fn json_source(s: &str) -> Result<Option<String>, String> {
    if let Some(path) = s.strip_prefix('@') {
        return fs::read_to_string(path).map(Some).map_err(|e| format!("cannot read {path}: {e}"));
    }
    let t = s.trim_start();
    Ok(if t.starts_with('{') || t.starts_with('[') || t.starts_with('"') { Some(s.to_string()) } else { None })
}

pub fn parse_group(s: &str) -> Result<GroupRef, String> {
    let g = match json_source(s)? {
        Some(json) => serde_json::from_str::<GroupRef>(&json).map_err(|e| located("group", &e))?,
        None => GroupRef::Name(s.to_string()),
    };
    g.resolve().map_err(|e| e.to_string())?;
    Ok(g)
}

pub fn parse_operator(s: &str) -> Result<OperatorSpec, String> {
    let json = json_source(s)?.ok_or_else(|| "operator must be inline JSON or @file".to_string())?;
    let spec: OperatorSpec = serde_json::from_str(&json).map_err(|e| located("operator", &e))?;
    crate::operator::Operator::new(spec.clone()).map_err(|e| e.to_string())?;
    Ok(spec)
}

pub fn parse_grid(s: &str) -> Result<OracleGridConfig, String> {
    let json = json_source(s)?.ok_or_else(|| "grid must be inline JSON or @file".to_string())?;
    serde_json::from_str(&json).map_err(|e| located("grid", &e))
}

/// A number with its error bar.
#[derive(Debug, Clone, Serialize)]
pub struct Quantity {
    pub name: String,
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportCheck {
    pub name: String,
    pub value: f64,
    pub error: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub toolkit_version: &'static str,
    pub command: &'static str,
    pub inputs: ExperimentConfig,
    pub quantities: Vec<Quantity>,
    pub checks: Vec<ReportCheck>,
    pub notes: Vec<String>,
    pub wall_clock_s: f64,
    pub pass: bool,
}

impl RunReport {
    pub fn failing(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect()
    }
}

/// Tabular output with a header row.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub table: Table,
    /// Human-readable summary lines.
    pub lines: Vec<String>,
}

impl RunOutput {
    pub fn exit_code(&self) -> i32 {
        if self.report.pass {
            0
        } else {
            1
        }
    }
}

pub const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Plots every column of a CSV table against its first column."""
import csv
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

src = sys.argv[1]
dst = sys.argv[2] if len(sys.argv) > 2 else src.rsplit(".", 1)[0] + ".png"
with open(src) as fh:
    rows = list(csv.reader(fh))
header, data = rows[0], [[float(v) for v in r] for r in rows[1:]]
fig, ax = plt.subplots()
for j in range(1, len(header)):
    ax.plot([r[0] for r in data], [r[j] for r in data], marker=".", label=header[j])
ax.set_xlabel(header[0])
ax.legend()
fig.savefig(dst, dpi=120)
"#;

pub fn write_csv(path: &Path, table: &Table) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Failed(format!("writing {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(&table.header).map_err(io)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Failed(e.to_string()))
}

/// Writes `<stem>.json`, `<stem>.csv`, `<stem>.config.json` and optionally `<stem>.plot.py`.
pub fn write_outputs(out: &RunOutput) -> Result<Vec<PathBuf>, CliError> {
    let cfg = &out.report.inputs.output;
    let Some(dir) = &cfg.dir else {
        return Ok(Vec::new());
    };
    let io = |p: &Path, e: std::io::Error| CliError::Failed(format!("writing {}: {e}", p.display()));
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut written = Vec::new();
    let report = dir.join(format!("{}.json", cfg.stem));
    let json = serde_json::to_string_pretty(&out.report).expect("report serializes");
    fs::write(&report, json + "\n").map_err(|e| io(&report, e))?;
    written.push(report);
    let config = dir.join(format!("{}.config.json", cfg.stem));
    fs::write(&config, out.report.inputs.to_json()).map_err(|e| io(&config, e))?;
    written.push(config);
    let csv = dir.join(format!("{}.csv", cfg.stem));
    write_csv(&csv, &out.table)?;
    written.push(csv);
    if cfg.plot {
        let plot = dir.join(format!("{}.plot.py", cfg.stem));
        fs::write(&plot, PLOT_SCRIPT).map_err(|e| io(&plot, e))?;
        written.push(plot);
    }
    Ok(written)
}
