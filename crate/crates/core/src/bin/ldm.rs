use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ldm::acquisition::{write_batch_log, Strategy};
use ldm::estimator::{
    estimate_ldm_pool, estimate_ldm_pool_independent, write_estimates_csv, EstimatorConfig,
};
use ldm::harness::dataset::{generate_blobs, generate_disk2d, load_features_csv, load_labeled_csv};
use ldm::harness::experiment::{prepare_data, run_experiment, RunOptions};
use ldm::harness::verify::{consistency, ConsistencyParams};
use ldm::harness::{
    report_file, run_suite, write_records, BlobsParams, Disk2dParams, ExperimentConfig, ReportKind,
    ReportOptions, Suite,
};
use ldm::model::{train, ModelKind, ModelSpec, Optimizer, TrainConfig, TrainedModel};
use ldm::Result;

#[derive(Parser)]
#[command(
    name = "ldm",
    version,
    about = "LDM estimation and LDM-seeded active learning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Disk2d,
    Blobs,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset as CSV.
    Datagen {
        #[arg(long, value_enum)]
        kind: GenKind,
        #[arg(long, default_value_t = 1000)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Disk2D label noise rate.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Disk2D separator normal angle (radians).
        #[arg(long, default_value_t = 0.5)]
        normal_angle: f64,
        #[arg(long, default_value_t = 3)]
        classes: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 1.0)]
        std: f64,
        /// Distance between neighbouring blob centres.
        #[arg(long, default_value_t = 10.0)]
        gap: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an active-learning experiment and write JSONL records.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        strategy: Option<Strategy>,
        /// Master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Extra `section.key=value` overrides, applied after the file.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        /// Append to `--out` instead of truncating it.
        #[arg(long)]
        append: bool,
        /// Also write the selected batches as CSV.
        #[arg(long)]
        batches: Option<PathBuf>,
    },
    /// Score a pool CSV against a checkpoint and write LDM estimates.
    Estimate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        pool: PathBuf,
        /// Column to ignore if the pool file has it.
        #[arg(long, default_value = "label")]
        label_column: String,
        #[arg(long, default_value_t = 10)]
        stop_condition: usize,
        /// Monte-Carlo subsample size (defaults to the whole pool).
        #[arg(long)]
        mc_size: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Independent draws per point instead of shared draws.
        #[arg(long)]
        independent: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a model on a labeled CSV and save a checkpoint.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "label")]
        label_column: String,
        #[arg(long, default_value = "logistic")]
        model: ModelKind,
        #[arg(long)]
        hidden_dim: Option<usize>,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        #[arg(long, default_value = "adam")]
        optimizer: Optimizer,
        #[arg(long, default_value_t = 0.01)]
        learning_rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a property suite; the exit status reflects the result.
    Verify {
        /// Suite name, or `all`.
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Run the consistency suite with s = 1, M = 10 (expected to fail).
        #[arg(long)]
        negative_control: bool,
    },
    /// Summarise JSONL records.
    Report {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        kind: ReportKind,
        #[arg(long, default_value_t = 2.776)]
        threshold: f64,
        #[arg(long, default_value_t = 0.2)]
        max_delta: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Datagen {
            kind,
            size,
            seed,
            noise,
            normal_angle,
            classes,
            dim,
            std,
            gap,
            out,
        } => {
            let data = match kind {
                GenKind::Disk2d => generate_disk2d(
                    &Disk2dParams {
                        n: size,
                        noise,
                        normal_angle,
                    },
                    seed,
                )?,
                GenKind::Blobs => generate_blobs(
                    &BlobsParams {
                        n: size,
                        classes,
                        dim,
                        std,
                        gap,
                        centers: None,
                    },
                    seed,
                )?,
            };
            data.write_csv(BufWriter::new(File::create(&out)?))?;
            log::info!("wrote {} rows to {}", data.len(), out.display());
        }
        Command::Run {
            config,
            strategy,
            seed,
            overrides,
            out,
            append,
            batches,
        } => {
            let mut cfg = match config {
                Some(p) => ExperimentConfig::from_path(p)?,
                None => ExperimentConfig::default(),
            };
            cfg.apply_overrides(&overrides)?;
            if let Some(s) = strategy {
                cfg.strategy = s;
            }
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            cfg.validate()?;
            let data = prepare_data(&cfg)?;
            if let Some(map) = &data.label_map {
                for (class, original) in map.iter().enumerate() {
                    log::info!("label {original} -> class {class}");
                }
            }
            let opts = RunOptions {
                batch_log: batches.is_some(),
            };
            let outcomes = run_experiment(&cfg, &data, opts)?;
            let file = OpenOptions::new()
                .create(true)
                .write(true)
                .append(append)
                .truncate(!append)
                .open(&out)?;
            let records: Vec<_> = outcomes.iter().flat_map(|o| o.records.clone()).collect();
            write_records(&records, BufWriter::new(file))?;
            if let Some(path) = batches {
                let mut w = BufWriter::new(File::create(path)?);
                for (r, o) in outcomes.iter().enumerate() {
                    write_batch_log(&o.batch_log, &mut w, r == 0)?;
                }
            }
            log::info!("wrote {} records to {}", records.len(), out.display());
        }
        Command::Estimate {
            checkpoint,
            pool,
            label_column,
            stop_condition,
            mc_size,
            seed,
            independent,
            out,
        } => {
            let model = TrainedModel::load(&checkpoint)?;
            let xs = load_features_csv(&pool, Some(&label_column))?;
            let cfg = EstimatorConfig {
                stop_condition,
                mc_size: mc_size.unwrap_or(xs.len()),
                seed,
                ..EstimatorConfig::default()
            };
            let est = if independent {
                estimate_ldm_pool_independent(&xs, &model, &cfg)?
            } else {
                estimate_ldm_pool(&xs, &model, &cfg)?
            };
            write_estimates_csv(&est, output(out.as_deref())?)?;
        }
        Command::Train {
            data,
            label_column,
            model,
            hidden_dim,
            epochs,
            batch_size,
            optimizer,
            learning_rate,
            seed,
            out,
        } => {
            let (set, label_map) = load_labeled_csv(&data, &label_column)?;
            let spec = match model {
                ModelKind::Linear2D => ModelSpec::linear_2d(seed),
                ModelKind::Logistic => ModelSpec::logistic(set.dim(), set.num_classes, seed),
                ModelKind::Mlp => {
                    ModelSpec::mlp(set.dim(), hidden_dim.unwrap_or(64), set.num_classes, seed)
                }
            };
            let cfg = TrainConfig {
                epochs,
                batch_size,
                optimizer,
                learning_rate,
                seed,
            };
            let m = train(&set.features, &set.labels, &spec, &cfg)?;
            for (class, original) in label_map.iter().enumerate() {
                log::info!("label {original} -> class {class}");
            }
            println!(
                "training accuracy {:.4}",
                m.accuracy(&set.features, &set.labels)?
            );
            m.save(&out)?;
        }
        Command::Verify {
            suite,
            seed,
            negative_control,
        } => {
            let reports = if negative_control {
                vec![consistency(&ConsistencyParams {
                    seed,
                    ..ConsistencyParams::negative_control()
                })?]
            } else if suite.eq_ignore_ascii_case("all") {
                Suite::ALL
                    .into_iter()
                    .map(|s| run_suite(s, seed))
                    .collect::<Result<_>>()?
            } else {
                vec![run_suite(suite.parse()?, seed)?]
            };
            for r in &reports {
                println!("{r}");
            }
            return Ok(reports.iter().all(|r| r.passed));
        }
        Command::Report {
            records,
            kind,
            threshold,
            max_delta,
            out,
        } => {
            let opts = ReportOptions {
                threshold,
                max_delta,
                ..ReportOptions::default()
            };
            let report = report_file(&records, kind, &opts)?;
            output(out.as_deref())?.write_all(report.csv.as_bytes())?;
            if let Some(text) = report.text {
                if out.is_some() {
                    print!("{text}");
                } else {
                    eprint!("{text}");
                }
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
