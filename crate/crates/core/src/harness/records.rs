//! One JSON object per line; fields are serialised in declaration order.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::ResultTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub algorithm: String,
    pub dataset: String,
    pub repetition: usize,
    pub step: usize,
    pub labeled_count: usize,
    /// `None` on the record of a step whose training failed.
    pub test_accuracy: Option<f64>,
    pub wall_time_seconds: f64,
    /// Seed of the repetition's substream.
    pub seed: u64,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

pub fn write_records<W: Write>(records: &[ExperimentRecord], mut out: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Parse JSONL records; blank lines are skipped.
pub fn read_records<R: BufRead>(input: R, path: &Path) -> Result<Vec<ExperimentRecord>> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ExperimentRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        records.push(rec);
    }
    Ok(records)
}

pub fn read_records_file(path: impl AsRef<Path>) -> Result<Vec<ExperimentRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    read_records(std::io::BufReader::new(file), path)
}

/// Accuracy grid of the successful records.
pub fn result_table(records: &[ExperimentRecord]) -> Result<ResultTable> {
    let mut table = ResultTable::new();
    for r in records {
        if let Some(acc) = r.test_accuracy {
            table.insert(&r.dataset, &r.algorithm, r.repetition, r.step, acc)?;
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(step: usize) -> ExperimentRecord {
        ExperimentRecord {
            algorithm: "random".into(),
            dataset: "disk2d".into(),
            repetition: 0,
            step,
            labeled_count: 6 + step,
            test_accuracy: Some(0.875),
            wall_time_seconds: 0.0,
            seed: 12,
            config_hash: "00ff".into(),
            failure: None,
        }
    }

    #[test]
    fn stable_key_order() {
        let mut buf = Vec::new();
        write_records(&[record(1)], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "{\"algorithm\":\"random\",\"dataset\":\"disk2d\",\"repetition\":0,\"step\":1,\
             \"labeled_count\":7,\"test_accuracy\":0.875,\"wall_time_seconds\":0.0,\"seed\":12,\
             \"config_hash\":\"00ff\"}\n"
        );
    }

    #[test]
    fn roundtrip_and_errors() {
        let mut failed = record(2);
        failed.test_accuracy = None;
        failed.failure = Some("diverged".into());
        let recs = vec![record(0), record(1), failed];
        let mut buf = Vec::new();
        write_records(&recs, &mut buf).unwrap();
        buf.extend_from_slice(b"\n");
        let back = read_records(buf.as_slice(), Path::new("r.jsonl")).unwrap();
        assert_eq!(back, recs);
        let table = result_table(&back).unwrap();
        assert!(table.validate().is_ok());

        let bad = b"{\"algorithm\":\"x\"}\n";
        assert!(matches!(
            read_records(&bad[..], Path::new("r.jsonl")),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
