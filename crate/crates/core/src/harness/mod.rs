//! Experiment plumbing: configuration, datasets, the active-learning loop,
//! JSONL records, verification suites and reports.

pub mod config;
pub mod dataset;
pub mod experiment;
pub mod records;
pub mod report;
pub mod verify;

pub use config::{DatasetKind, ExperimentConfig};
pub use dataset::{load_dataset_csv, BlobsParams, Dataset, Disk2dParams, Split};
pub use experiment::{al_experiment, prepare_data, run_experiment, run_repetition, RunOptions};
pub use records::{read_records_file, write_records, ExperimentRecord};
pub use report::{build_report, report_file, ReportKind, ReportOptions};
pub use verify::{run_suite, Suite, SuiteReport};
