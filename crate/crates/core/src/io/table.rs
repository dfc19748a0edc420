//! CSV corpora in, CSV and JSON reports out.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{format_sig9, write_atomic, IoError, IoResult};
use crate::metrics::SelectionReport;
use crate::score_model::JointScoreModel;

/// Column layout of an empirical corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusMode {
    /// Header `score,true_score`.
    Joint,
    /// Header `score,outcome` with outcomes 0 or 1.
    Labeled,
}

impl CorpusMode {
    fn header(self) -> [&'static str; 2] {
        match self {
            CorpusMode::Joint => ["score", "true_score"],
            CorpusMode::Labeled => ["score", "outcome"],
        }
    }
}

/// Loads a corpus. Row numbers in errors count data rows from 1.
pub fn load_empirical_csv(path: &Path, mode: CorpusMode) -> IoResult<JointScoreModel> {
    let bytes = fs::read(path).map_err(|e| IoError::Format {
        path: path.to_path_buf(),
        message: format!("cannot read corpus: {e}"),
    })?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes.as_slice());
    let expected = mode.header();
    let header = reader.headers().map_err(|e| format_err(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(IoError::Format {
            path: path.to_path_buf(),
            message: format!("expected header `{}`, found `{}`", expected.join(","), header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut first = Vec::new();
    let mut second = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| row_err(path, row, e))?;
        let score = parse_unit(&record[0], "score").map_err(|m| row_err(path, row, m))?;
        let other = match mode {
            CorpusMode::Joint => parse_unit(&record[1], "true_score").map_err(|m| row_err(path, row, m))?,
            CorpusMode::Labeled => match record[1].trim() {
                "0" => 0.0,
                "1" => 1.0,
                v => return Err(row_err(path, row, format!("outcome `{v}` is not 0 or 1"))),
            },
        };
        first.push(score);
        second.push(other);
    }
    if first.is_empty() {
        return Err(IoError::Format {
            path: path.to_path_buf(),
            message: "corpus has no data rows".into(),
        });
    }
    let pairs = first.into_iter().zip(second);
    let model = match mode {
        CorpusMode::Joint => JointScoreModel::empirical_joint(pairs),
        CorpusMode::Labeled => JointScoreModel::empirical_labeled(pairs.map(|(s, o)| (s, o == 1.0))),
    };
    model.map_err(IoError::Model)
}

fn parse_unit(field: &str, name: &str) -> Result<f64, String> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| format!("{name} `{field}` is not a number"))?;
    if !(0.0..=1.0).contains(&v) {
        return Err(format!("{name} {v} is outside [0, 1]"));
    }
    Ok(v)
}

fn row_err(path: &Path, row: usize, message: impl std::fmt::Display) -> IoError {
    IoError::Row {
        path: path.to_path_buf(),
        row,
        message: message.to_string(),
    }
}

fn format_err(path: &Path, e: impl std::fmt::Display) -> IoError {
    IoError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

const SWEEP_HEADER: [&str; 8] = ["axis", "policy", "tau", "fluid_w", "sim_mean", "sim_se", "gap", "rel_gap"];

/// One policy evaluated at one sweep value.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis: f64,
    pub policy: String,
    pub tau: f64,
    pub fluid_w: f64,
    pub sim_mean: Option<f64>,
    pub sim_se: Option<f64>,
    pub gap: f64,
    pub rel_gap: f64,
}

/// Rows kept sorted by axis value, then policy label.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepTable {
    rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn new(mut rows: Vec<SweepRow>) -> Self {
        rows.sort_by(|a, b| a.axis.total_cmp(&b.axis).then_with(|| a.policy.cmp(&b.policy)));
        Self { rows }
    }

    pub fn rows(&self) -> &[SweepRow] {
        &self.rows
    }

    /// Policy labels in sorted order.
    pub fn policies(&self) -> Vec<&str> {
        let mut labels: Vec<&str> = self.rows.iter().map(|r| r.policy.as_str()).collect();
        labels.sort_unstable();
        labels.dedup();
        labels
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(format_sig9).unwrap_or_default()
}

/// Serializes with `\n` line endings and 9 significant digits.
pub fn sweep_csv(table: &SweepTable) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(SWEEP_HEADER).expect("in-memory write");
    for r in table.rows() {
        w.write_record([
            format_sig9(r.axis),
            r.policy.clone(),
            format_sig9(r.tau),
            format_sig9(r.fluid_w),
            opt(r.sim_mean),
            opt(r.sim_se),
            format_sig9(r.gap),
            format_sig9(r.rel_gap),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
}

pub fn write_sweep_csv(table: &SweepTable, path: &Path) -> IoResult<()> {
    write_atomic(path, sweep_csv(table).as_bytes())
}

pub fn read_sweep_csv(path: &Path) -> IoResult<SweepTable> {
    let bytes = fs::read(path).map_err(|e| IoError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes.as_slice());
    let header = reader.headers().map_err(|e| format_err(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != SWEEP_HEADER {
        return Err(format_err(path, format!("expected header `{}`", SWEEP_HEADER.join(","))));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| row_err(path, row, e))?;
        let num = |k: usize| -> IoResult<f64> {
            record[k]
                .parse()
                .map_err(|_| row_err(path, row, format!("{} `{}` is not a number", SWEEP_HEADER[k], &record[k])))
        };
        let maybe = |k: usize| -> IoResult<Option<f64>> {
            if record[k].is_empty() {
                Ok(None)
            } else {
                num(k).map(Some)
            }
        };
        rows.push(SweepRow {
            axis: num(0)?,
            policy: record[1].to_string(),
            tau: num(2)?,
            fluid_w: num(3)?,
            sim_mean: maybe(4)?,
            sim_se: maybe(5)?,
            gap: num(6)?,
            rel_gap: num(7)?,
        });
    }
    Ok(SweepTable::new(rows))
}

/// Fluid-versus-finite comparison at one population size.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRow {
    pub n: usize,
    pub m: usize,
    pub tau: f64,
    pub fluid_w: f64,
    pub finite_w: f64,
    /// Standard error when `finite_w` is a Monte Carlo estimate.
    pub finite_se: Option<f64>,
    pub method: String,
    pub rel_error: f64,
}

pub fn validation_csv(rows: &[ValidationRow]) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(["n", "m", "tau", "fluid_w", "finite_w", "finite_se", "method", "rel_error"])
        .expect("in-memory write");
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.m.to_string(),
            format_sig9(r.tau),
            format_sig9(r.fluid_w),
            format_sig9(r.finite_w),
            opt(r.finite_se),
            r.method.clone(),
            format_sig9(r.rel_error),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
}

/// Per-candidate capacity tables, candidates in name order.
pub fn selection_csv(report: &SelectionReport) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(["candidate", "rho", "weight", "tau", "tpr", "integrand"])
        .expect("in-memory write");
    let mut candidates: Vec<_> = report.candidates.iter().collect();
    candidates.sort_by(|a, b| a.name.cmp(&b.name));
    for c in candidates {
        for p in &c.table {
            w.write_record([
                c.name.clone(),
                format_sig9(p.rho),
                format_sig9(p.weight),
                format_sig9(p.tau),
                format_sig9(p.tpr),
                format_sig9(p.integrand),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
}

pub fn selection_summary_json(report: &SelectionReport) -> String {
    let mut candidates: Vec<_> = report.candidates.iter().collect();
    candidates.sort_by(|a, b| a.name.cmp(&b.name));
    let doc = serde_json::json!({
        "winner_by_auc": report.winner_by_auc,
        "winner_by_opauc": report.winner_by_opauc,
        "candidates": candidates
            .iter()
            .map(|c| serde_json::json!({"name": c.name, "auc": c.auc, "opauc": c.opauc}))
            .collect::<Vec<_>>(),
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("json values serialize");
    text.push('\n');
    text
}
