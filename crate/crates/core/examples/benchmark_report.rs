//! Run every strategy on a Blobs benchmark, write the JSONL records and
//! summarise them as a penalty matrix and a performance profile.
//!
//! ```bash
//! cargo run --release --example benchmark_report
//! ```

use std::fs::File;
use std::io::BufWriter;

use ldm::acquisition::Strategy;
use ldm::harness::records::result_table;
use ldm::harness::{
    al_experiment, build_report, write_records, ExperimentConfig, ReportKind, ReportOptions,
};
use ldm::stats::performance_profile;

const CONFIG: &str = "
dataset.kind = blobs
dataset.size = 1200
dataset.classes = 3
dataset.gap = 2.5
model.kind = logistic
train.epochs = 50
experiment.initial_labeled = 10
experiment.pool_size = 300
experiment.query_size = 10
experiment.steps = 4
experiment.repetitions = 5
";

fn main() -> ldm::Result<()> {
    let mut cfg = ExperimentConfig::parse_text(CONFIG, None)?;
    let mut records = Vec::new();
    for strategy in Strategy::ALL {
        cfg.strategy = strategy;
        records.extend(al_experiment(&cfg)?);
    }
    let path = std::env::temp_dir().join("ldm-benchmark.jsonl");
    write_records(&records, BufWriter::new(File::create(&path)?))?;
    println!("{} records written to {}", records.len(), path.display());

    let opts = ReportOptions::default();
    let penalty = build_report(&records, ReportKind::PenaltyMatrix, &opts)?;
    print!("{}", penalty.text.unwrap_or(penalty.csv));

    let table = result_table(&records)?;
    let profile = performance_profile(&table, &[0.0, 0.01, 0.05])?;
    println!("\nalgorithm  R(0)    R(0.01) R(0.05)");
    for (alg, curve) in &profile.curves {
        println!(
            "{alg:<9}  {:.3}   {:.3}   {:.3}",
            curve[0], curve[1], curve[2]
        );
    }
    Ok(())
}
