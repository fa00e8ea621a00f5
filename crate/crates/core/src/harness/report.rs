//! Summaries of accumulated JSONL records.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use super::records::{read_records_file, result_table, ExperimentRecord};
use crate::error::{Error, Result};
use crate::stats::{delta_grid, penalty_matrix, performance_profile, T_CRITICAL_R5};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    Profile,
    PenaltyMatrix,
    Curves,
}

impl ReportKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ReportKind::Profile => "profile",
            ReportKind::PenaltyMatrix => "penalty-matrix",
            ReportKind::Curves => "curves",
        }
    }
}

impl fmt::Display for ReportKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReportKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "profile" => Ok(ReportKind::Profile),
            "penalty-matrix" | "penaltymatrix" | "penalty" => Ok(ReportKind::PenaltyMatrix),
            "curves" => Ok(ReportKind::Curves),
            _ => Err(Error::InvalidArgument(format!("unknown report kind `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    /// t-score needed for a win in the penalty matrix.
    pub threshold: f64,
    /// Largest δ of the profile grid.
    pub max_delta: f64,
    pub delta_points: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            threshold: T_CRITICAL_R5,
            max_delta: 0.2,
            delta_points: 41,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub csv: String,
    /// Human-readable rendering, when the kind has one.
    pub text: Option<String>,
}

fn csv_string(write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<String> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
}

/// Mean accuracy ± standard error over repetitions, per dataset, algorithm
/// and labeled count. CSV columns: `dataset,algorithm,x,y,stderr`.
fn curves_csv(records: &[ExperimentRecord]) -> Result<String> {
    let mut groups: BTreeMap<(String, String, usize, usize), Vec<f64>> = BTreeMap::new();
    for r in records {
        if let Some(acc) = r.test_accuracy {
            groups
                .entry((
                    r.dataset.clone(),
                    r.algorithm.clone(),
                    r.step,
                    r.labeled_count,
                ))
                .or_default()
                .push(acc);
        }
    }
    csv_string(|buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["dataset", "algorithm", "x", "y", "stderr"])?;
        for ((dataset, algorithm, _, labeled), accs) in &groups {
            let n = accs.len() as f64;
            let mean = accs.iter().sum::<f64>() / n;
            let stderr = if accs.len() > 1 {
                (accs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (n - 1.0) / n).sqrt()
            } else {
                0.0
            };
            w.write_record([
                dataset.clone(),
                algorithm.clone(),
                labeled.to_string(),
                mean.to_string(),
                stderr.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })
}

pub fn build_report(
    records: &[ExperimentRecord],
    kind: ReportKind,
    opts: &ReportOptions,
) -> Result<Report> {
    if records.is_empty() {
        return Err(Error::Empty("records"));
    }
    let table = result_table(records)?;
    table.validate()?;
    match kind {
        ReportKind::Profile => {
            let deltas = delta_grid(opts.max_delta, opts.delta_points);
            let profile = performance_profile(&table, &deltas)?;
            Ok(Report {
                csv: csv_string(|b| profile.write_csv(b))?,
                text: None,
            })
        }
        ReportKind::PenaltyMatrix => {
            let matrix = penalty_matrix(&table, opts.threshold)?;
            Ok(Report {
                csv: csv_string(|b| matrix.write_csv(b))?,
                text: Some(matrix.to_text()),
            })
        }
        ReportKind::Curves => Ok(Report {
            csv: curves_csv(records)?,
            text: None,
        }),
    }
}

pub fn report_file(
    path: impl AsRef<Path>,
    kind: ReportKind,
    opts: &ReportOptions,
) -> Result<Report> {
    build_report(&read_records_file(path)?, kind, opts)
}
