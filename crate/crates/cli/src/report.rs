//! Report records and their JSON/CSV serialization.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::ExperimentConfig;

pub const SCHEMA: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// A hypothesis of the construction does not hold for this case.
    Skipped,
}

/// A measured value compared against a limit: passes when `value <= limit`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit, pass: value <= limit }
    }

    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self { name: name.into(), value: if ok { 0.0 } else { 1.0 }, limit: 0.0, pass: ok }
    }
}

/// A lower estimate of an operator norm against its a-priori bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub bound: f64,
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
}

impl BoundCheck {
    pub fn new(name: impl Into<String>, bound: f64, lower: f64, upper: f64) -> Self {
        Self { name: name.into(), bound, lower, upper, pass: lower <= bound * (1.0 + 1e-9) }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Hypothesis {
    pub omega: f64,
    pub m: f64,
    /// `r_P` for `invert`, `re(q)` for `resolvent`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Record {
    pub case: usize,
    pub seed: u64,
    pub status: Status,
    pub hypothesis: Hypothesis,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<serde_json::Value>,
    /// The operators produced by the transform.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<serde_json::Value>,
    pub checks: Vec<Check>,
    pub bounds: Vec<BoundCheck>,
    /// Error estimate, truncation point and node count of each transform.
    pub quadrature: Vec<serde_json::Value>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub millis: Option<f64>,
}

impl Record {
    pub fn new(case: usize, seed: u64) -> Self {
        Self {
            case,
            seed,
            status: Status::Pass,
            hypothesis: Hypothesis::default(),
            input: None,
            output: None,
            checks: Vec::new(),
            bounds: Vec::new(),
            quadrature: Vec::new(),
            warnings: Vec::new(),
            error: None,
            millis: None,
        }
    }

    pub fn skip(&mut self, reason: String) {
        self.status = Status::Skipped;
        self.error = Some(reason);
    }

    pub fn fail(&mut self, reason: String) {
        self.status = Status::Fail;
        self.error = Some(reason);
    }

    /// Sets the status from the checks unless the record was already skipped or failed.
    pub fn finish(&mut self) {
        if self.status == Status::Pass
            && !(self.checks.iter().all(|c| c.pass) && self.bounds.iter().all(|b| b.pass))
        {
            self.status = Status::Fail;
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Summary {
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub schema: u32,
    pub command: String,
    pub config: ExperimentConfig,
    pub summary: Summary,
    pub records: Vec<Record>,
}

impl Report {
    pub fn new(command: &str, config: ExperimentConfig, records: Vec<Record>) -> Self {
        let mut summary = Summary::default();
        for r in &records {
            match r.status {
                Status::Pass => summary.passed += 1,
                Status::Fail => summary.failed += 1,
                Status::Skipped => summary.skipped += 1,
            }
        }
        Self { schema: SCHEMA, command: command.to_string(), config, summary, records }
    }

    pub fn failed(&self) -> bool {
        self.summary.failed > 0
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// One row per check and per bound.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["case", "seed", "status", "kind", "name", "value", "limit", "pass"])?;
        for r in &self.records {
            let status = status_str(r.status);
            let (case, seed) = (r.case.to_string(), r.seed.to_string());
            for c in &r.checks {
                w.write_record([&case, &seed, status, "check", &c.name, &num(c.value), &num(c.limit), &c.pass.to_string()])?;
            }
            for b in &r.bounds {
                w.write_record([&case, &seed, status, "bound", &b.name, &num(b.lower), &num(b.bound), &b.pass.to_string()])?;
            }
            if r.checks.is_empty() && r.bounds.is_empty() {
                w.write_record([&case, &seed, status, "", "", "", "", ""])?;
            }
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }

    /// Writes `path` and a CSV mirror next to it.
    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).with_context(|| format!("writing {}", path.display()))?;
        let csv_path = path.with_extension("csv");
        fs::write(&csv_path, self.to_csv()?).with_context(|| format!("writing {}", csv_path.display()))
    }
}

fn status_str(s: Status) -> &'static str {
    match s {
        Status::Pass => "pass",
        Status::Fail => "fail",
        Status::Skipped => "skipped",
    }
}

/// Shortest round-trip form, as in the JSON report.
fn num(x: f64) -> String {
    serde_json::Value::from(x).to_string()
}
