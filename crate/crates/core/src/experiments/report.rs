//! Tabular experiment results with per-cell statistics and verdicts.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean and sample standard deviation of repeated measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    /// Aligned with [`ExperimentReport::parameters`].
    pub params: Vec<f64>,
    /// Aligned with [`ExperimentReport::quantities`].
    pub values: Vec<Stat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub expected: f64,
    pub actual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Verdict {
    /// Passes when `|actual - expected| <= tolerance`.
    pub fn within(name: impl Into<String>, expected: f64, actual: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            expected,
            actual,
            tolerance,
            pass: (actual - expected).abs() <= tolerance,
        }
    }

    /// Passes when `actual <= limit`.
    pub fn at_most(name: impl Into<String>, limit: f64, actual: f64) -> Self {
        Self {
            name: name.into(),
            expected: limit,
            actual,
            tolerance: 0.0,
            pass: actual <= limit,
        }
    }

    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self {
            name: name.into(),
            expected: 1.0,
            actual: if ok { 1.0 } else { 0.0 },
            tolerance: 0.0,
            pass: ok,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub seed: u64,
    pub config_digest: String,
    pub repetitions: u32,
    pub parameters: Vec<String>,
    pub quantities: Vec<String>,
    pub rows: Vec<ReportRow>,
    pub verdicts: Vec<Verdict>,
    /// Scalar results (fits, scores, hull area), keyed by name.
    pub summary: BTreeMap<String, f64>,
    /// Free-form notes such as extrapolation flags.
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn new(
        experiment: impl Into<String>,
        seed: u64,
        config_digest: impl Into<String>,
        repetitions: u32,
    ) -> Self {
        Self {
            experiment: experiment.into(),
            seed,
            config_digest: config_digest.into(),
            repetitions,
            parameters: Vec::new(),
            quantities: Vec::new(),
            rows: Vec::new(),
            verdicts: Vec::new(),
            summary: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    /// Row whose parameters equal `params` exactly.
    pub fn row(&self, params: &[f64]) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.params == params)
    }

    pub fn quantity_index(&self, name: &str) -> Option<usize> {
        self.quantities.iter().position(|q| q == name)
    }

    pub fn value(&self, params: &[f64], quantity: &str) -> Option<Stat> {
        let q = self.quantity_index(quantity)?;
        self.row(params).map(|r| r.values[q])
    }

    /// Largest standard deviation of `quantity` over all rows.
    pub fn max_std(&self, quantity: &str) -> f64 {
        let Some(q) = self.quantity_index(quantity) else {
            return f64::NAN;
        };
        self.rows
            .iter()
            .map(|r| r.values[q].std)
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions < 1 {
            return Err(Error::domain("report needs at least one repetition"));
        }
        for r in &self.rows {
            if r.params.len() != self.parameters.len() || r.values.len() != self.quantities.len() {
                return Err(Error::format("report row width does not match its header"));
            }
            if r.values.iter().any(|s| s.std < 0.0) {
                return Err(Error::domain("negative standard deviation"));
            }
        }
        Ok(())
    }

    /// Delimited text: `#` header lines, then one row per cell.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# format: {} {}", REPORT_FORMAT, REPORT_VERSION)?;
        writeln!(w, "# experiment: {}", self.experiment)?;
        writeln!(w, "# seed: {}", self.seed)?;
        writeln!(w, "# config_digest: {}", self.config_digest)?;
        writeln!(w, "# repetitions: {}", self.repetitions)?;
        for n in &self.notes {
            writeln!(w, "# note: {n}")?;
        }
        let mut csv = csv::Writer::from_writer(w);
        let mut header: Vec<String> = self.parameters.clone();
        for q in &self.quantities {
            header.push(format!("{q}_mean"));
            header.push(format!("{q}_std"));
        }
        csv.write_record(&header)?;
        for r in &self.rows {
            let mut rec: Vec<String> = r.params.iter().map(|v| v.to_string()).collect();
            for s in &r.values {
                rec.push(s.mean.to_string());
                rec.push(s.std.to_string());
            }
            csv.write_record(&rec)?;
        }
        csv.flush()?;
        Ok(())
    }

    /// Structured summary document.
    pub fn to_json(&self) -> Result<String> {
        let doc = ReportDocument {
            format: REPORT_FORMAT.into(),
            version: REPORT_VERSION.into(),
            report: self.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ReportDocument = serde_json::from_str(text)?;
        if doc.format != REPORT_FORMAT {
            return Err(Error::format(format!(
                "not a report file: format `{}`",
                doc.format
            )));
        }
        crate::interface::check_version(&doc.version)?;
        doc.report.validate()?;
        Ok(doc.report)
    }
}

pub const REPORT_FORMAT: &str = "pneumahand.report";
pub const REPORT_VERSION: &str = "1.0";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportDocument {
    format: String,
    version: String,
    report: ExperimentReport,
}
