//! Active learning on the 2D disk with a bias-free linear classifier:
//! LDM-S against Random and Entropy, one label per step.
//!
//! ```bash
//! cargo run --release --example active_learning_2d
//! ```

use std::collections::BTreeMap;

use ldm::acquisition::Strategy;
use ldm::harness::{al_experiment, ExperimentConfig};

const CONFIG: &str = "
dataset.kind = disk2d
dataset.size = 2000
dataset.train_fraction = 0.5
model.kind = linear2d
train.epochs = 100
train.learning_rate = 0.1
experiment.initial_per_class = 3
experiment.pool_size = 500
experiment.query_size = 1
experiment.steps = 14
experiment.repetitions = 20
";

fn main() -> ldm::Result<()> {
    let mut cfg = ExperimentConfig::parse_text(CONFIG, None)?;
    let mut curves: BTreeMap<usize, Vec<(Strategy, f64)>> = BTreeMap::new();
    for strategy in [Strategy::LdmS, Strategy::Random, Strategy::Entropy] {
        cfg.strategy = strategy;
        let records = al_experiment(&cfg)?;
        let mut sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        for r in &records {
            if let Some(acc) = r.test_accuracy {
                let e = sums.entry(r.labeled_count).or_default();
                e.0 += acc;
                e.1 += 1;
            }
        }
        for (labels, (sum, n)) in sums {
            curves
                .entry(labels)
                .or_default()
                .push((strategy, sum / n as f64));
        }
    }
    println!("labels  ldm-s   random  entropy");
    for (labels, row) in curves {
        let cells: Vec<String> = row.iter().map(|(_, a)| format!("{a:.4}")).collect();
        println!("{labels:>6}  {}", cells.join("  "));
    }
    Ok(())
}
