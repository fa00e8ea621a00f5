//! The pool-based active-learning loop.
//!
//! Every random choice in repetition `r` comes from a substream of
//! `derive_key(master_seed, [r])`, and none depends on the strategy, so
//! strategies compared under one master seed share initial labels, pool
//! draws and training shuffles.

use std::time::Instant;

use rand::seq::index;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::config::{DatasetKind, ExperimentConfig};
use super::dataset::{generate_blobs, generate_disk2d, load_dataset_csv, split_dataset, Dataset};
use super::records::ExperimentRecord;
use crate::acquisition::{
    compute_weights, coreset_select, entropy_select, ldm_seeded_select, margin_select,
    random_select, BatchLogRow, SelectionBatch, Strategy,
};
use crate::error::{Error, Result};
use crate::estimator::{estimate_ldm_pool, EstimatorConfig};
use crate::model::{train, train_from, TrainConfig, TrainedModel};
use crate::rng;

const STREAM_INITIAL: u64 = 0;
const STREAM_POOL: u64 = 1;
const STREAM_TRAIN: u64 = 2;
const STREAM_ESTIMATOR: u64 = 3;
const STREAM_SELECT: u64 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub id: String,
    pub train: Dataset,
    pub test: Dataset,
    /// Original labels of a CSV dataset, indexed by remapped class.
    pub label_map: Option<Vec<i64>>,
}

/// Load or generate the dataset and split it.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    let d = &cfg.dataset;
    let id = d.dataset_id();
    let (train, test, label_map) = match d.kind {
        DatasetKind::Csv => {
            let path = d
                .path
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("dataset.path is required".into()))?;
            let split = load_dataset_csv(path, &d.label_column, d.train_fraction, d.seed)?;
            (split.train, split.test, Some(split.label_map))
        }
        DatasetKind::Disk2d | DatasetKind::Blobs => {
            let gen_seed = rng::derive_key(d.seed, &[0]);
            let data = if d.kind == DatasetKind::Disk2d {
                generate_disk2d(&d.disk, gen_seed)?
            } else {
                generate_blobs(&d.blobs, gen_seed)?
            };
            let (train, test) =
                split_dataset(&data, d.train_fraction, rng::derive_key(d.seed, &[1]))?;
            (train, test, None)
        }
    };
    Ok(PreparedData {
        id,
        train,
        test,
        label_map,
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Keep per-selection rows for a batch log.
    pub batch_log: bool,
}

/// State exposed to observers after each selection.
#[derive(Debug)]
pub struct StepView<'a> {
    pub repetition: usize,
    pub step: usize,
    /// Training-set indices, labeled before this step's selection.
    pub labeled: &'a [usize],
    pub unlabeled: &'a [usize],
    pub pool: &'a [usize],
    /// Selected training-set indices, in selection order.
    pub batch: &'a [usize],
    /// Every training-set index whose label was read during this step,
    /// in read order, up to and including the selection.
    pub labels_read: &'a [usize],
}

#[derive(Debug, Clone, Default)]
pub struct RepetitionOutcome {
    pub records: Vec<ExperimentRecord>,
    pub batch_log: Vec<BatchLogRow>,
}

/// Reveals labels only for indices that have been labeled.
struct LabelOracle<'a> {
    labels: &'a [usize],
    revealed: Vec<bool>,
    reads: Vec<usize>,
}

impl<'a> LabelOracle<'a> {
    fn new(labels: &'a [usize]) -> Self {
        Self {
            labels,
            revealed: vec![false; labels.len()],
            reads: Vec::new(),
        }
    }

    fn reveal(&mut self, i: usize) {
        self.revealed[i] = true;
    }

    fn label(&mut self, i: usize) -> Result<usize> {
        if !self.revealed[i] {
            return Err(Error::LabelLeak { index: i });
        }
        self.reads.push(i);
        Ok(self.labels[i])
    }
}

/// Proportional allocation of `total` over class sizes (largest remainder,
/// ties to the lower class), capped by each class size.
fn stratified_counts(class_sizes: &[usize], total: usize) -> Vec<usize> {
    let n: usize = class_sizes.iter().sum();
    let exact: Vec<f64> = class_sizes
        .iter()
        .map(|&c| total as f64 * c as f64 / n as f64)
        .collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..class_sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut left = total - counts.iter().sum::<usize>();
    for &c in order.iter().cycle().take(order.len() * 2) {
        if left == 0 {
            break;
        }
        if counts[c] < class_sizes[c] {
            counts[c] += 1;
            left -= 1;
        }
    }
    counts
}

/// Initial labeled indices: per class either a fixed count or a share
/// proportional to the training distribution.
pub fn initial_labeled_set(
    labels: &[usize],
    num_classes: usize,
    total: usize,
    per_class: Option<usize>,
    seed: u64,
) -> Result<Vec<usize>> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    let sizes: Vec<usize> = by_class.iter().map(Vec::len).collect();
    let counts = match per_class {
        Some(k) => vec![k; num_classes],
        None => {
            if total > labels.len() {
                return Err(Error::PoolTooSmall {
                    requested: total,
                    available: labels.len(),
                });
            }
            stratified_counts(&sizes, total)
        }
    };
    let mut stream = rng::stream(seed);
    let mut chosen = Vec::new();
    for (members, &k) in by_class.iter_mut().zip(&counts) {
        if k > members.len() {
            return Err(Error::PoolTooSmall {
                requested: k,
                available: members.len(),
            });
        }
        let (picked, _) = members.partial_shuffle(&mut stream, k);
        chosen.extend_from_slice(picked);
    }
    Ok(chosen)
}

fn select(
    cfg: &ExperimentConfig,
    model: &TrainedModel,
    pool_x: &[Vec<f64>],
    labeled_x: &[Vec<f64>],
    estimator_seed: u64,
    select_seed: u64,
) -> Result<(SelectionBatch, Option<Vec<f64>>)> {
    let q = cfg.query_size;
    let mut stream = rng::stream(select_seed);
    Ok(match cfg.strategy {
        Strategy::LdmS => {
            let est_cfg = EstimatorConfig {
                seed: estimator_seed,
                ..cfg.estimator.clone()
            };
            let ldm: Vec<f64> = estimate_ldm_pool(pool_x, model, &est_cfg)?
                .iter()
                .map(|e| e.value)
                .collect();
            let features = model.features_batch(pool_x)?;
            (
                ldm_seeded_select(&features, &ldm, q, &mut stream)?,
                Some(ldm),
            )
        }
        Strategy::Random => (random_select(pool_x.len(), q, &mut stream)?, None),
        Strategy::Entropy => (
            entropy_select(&model.predict_proba_batch(pool_x)?, q)?,
            None,
        ),
        Strategy::Margin => (margin_select(&model.predict_proba_batch(pool_x)?, q)?, None),
        Strategy::Coreset => {
            let features = model.features_batch(pool_x)?;
            let labeled = model.features_batch(labeled_x)?;
            (coreset_select(&features, &labeled, q)?, None)
        }
    })
}

/// One repetition; `observer` sees the sets after every selection.
pub fn run_repetition(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    repetition: usize,
    opts: RunOptions,
    observer: &mut dyn FnMut(&StepView<'_>),
) -> Result<RepetitionOutcome> {
    let train_set = &data.train;
    let n = train_set.len();
    let spec = cfg.model.spec(train_set.dim(), train_set.num_classes, 0)?;
    if data.test.dim() != train_set.dim() {
        return Err(Error::DimensionMismatch {
            expected: train_set.dim(),
            got: data.test.dim(),
        });
    }
    let rep_seed = rng::derive_key(cfg.master_seed, &[repetition as u64]);
    let config_hash = cfg.config_hash();

    let mut labeled = initial_labeled_set(
        &train_set.labels,
        train_set.num_classes,
        cfg.initial_labeled,
        cfg.initial_per_class,
        rng::derive_key(rep_seed, &[STREAM_INITIAL]),
    )?;
    let needed = labeled.len() + cfg.steps * cfg.query_size;
    if needed > n {
        return Err(Error::PoolTooSmall {
            requested: needed,
            available: n,
        });
    }
    let mut oracle = LabelOracle::new(&train_set.labels);
    let mut is_labeled = vec![false; n];
    for &i in &labeled {
        oracle.reveal(i);
        is_labeled[i] = true;
    }
    let mut unlabeled: Vec<usize> = (0..n).filter(|&i| !is_labeled[i]).collect();

    let mut out = RepetitionOutcome::default();
    let mut model: Option<TrainedModel> = None;
    let record = |step: usize, labeled_count: usize, acc: Option<f64>, secs: f64, failure| {
        ExperimentRecord {
            algorithm: cfg.strategy.to_string(),
            dataset: data.id.clone(),
            repetition,
            step,
            labeled_count,
            test_accuracy: acc,
            wall_time_seconds: secs,
            seed: rep_seed,
            config_hash: config_hash.clone(),
            failure,
        }
    };

    for step in 0..=cfg.steps {
        let started = Instant::now();
        oracle.reads.clear();
        let xs: Vec<Vec<f64>> = labeled
            .iter()
            .map(|&i| train_set.features[i].clone())
            .collect();
        let ys: Vec<usize> = labeled
            .iter()
            .map(|&i| oracle.label(i))
            .collect::<Result<_>>()?;
        let train_cfg = TrainConfig {
            seed: rng::derive_key(rep_seed, &[STREAM_TRAIN, step as u64]),
            ..cfg.train.clone()
        };
        let trained = match (&model, cfg.warm_start) {
            (Some(prev), true) => train_from(&xs, &ys, prev, &train_cfg),
            _ => train(&xs, &ys, &spec, &train_cfg),
        };
        let current = match trained {
            Ok(m) => m,
            Err(Error::Diverged { epoch }) => {
                log::warn!("repetition {repetition} step {step}: training diverged at epoch {epoch}; aborting repetition");
                out.records.push(record(
                    step,
                    labeled.len(),
                    None,
                    0.0,
                    Some(format!("training diverged at epoch {epoch}")),
                ));
                return Ok(out);
            }
            Err(e) => return Err(e),
        };
        let accuracy = current.accuracy(&data.test.features, &data.test.labels)?;

        let mut secs = started.elapsed().as_secs_f64();
        if step < cfg.steps {
            let m = if unlabeled.len() < cfg.pool_size {
                log::warn!(
                    "repetition {repetition} step {step}: {} unlabeled points, fewer than pool size {}; using all",
                    unlabeled.len(),
                    cfg.pool_size
                );
                unlabeled.len()
            } else {
                cfg.pool_size
            };
            if m < cfg.query_size {
                return Err(Error::PoolTooSmall {
                    requested: cfg.query_size,
                    available: m,
                });
            }
            let mut pool_stream = rng::substream(rep_seed, &[STREAM_POOL, step as u64]);
            let pool: Vec<usize> = index::sample(&mut pool_stream, unlabeled.len(), m)
                .into_iter()
                .map(|p| unlabeled[p])
                .collect();
            let pool_x: Vec<Vec<f64>> = pool
                .iter()
                .map(|&i| train_set.features[i].clone())
                .collect();
            let (batch, ldm) = select(
                cfg,
                &current,
                &pool_x,
                &xs,
                rng::derive_key(rep_seed, &[STREAM_ESTIMATOR, step as u64]),
                rng::derive_key(rep_seed, &[STREAM_SELECT, step as u64]),
            )?;
            if batch.fallback_draws > 0 {
                log::warn!(
                    "repetition {repetition} step {step}: {} uniform fallback draws",
                    batch.fallback_draws
                );
            }
            if opts.batch_log {
                let gamma = match &ldm {
                    Some(l) => Some(compute_weights(l, cfg.query_size)?.gamma),
                    None => None,
                };
                for (order, &p) in batch.indices.iter().enumerate() {
                    out.batch_log.push(BatchLogRow {
                        step,
                        strategy: cfg.strategy,
                        pool_index: p,
                        ldm_value: ldm.as_ref().map(|l| l[p]),
                        weight: gamma.as_ref().map(|g| g[p]),
                        selection_order: order,
                    });
                }
            }
            let chosen: Vec<usize> = batch.indices.iter().map(|&p| pool[p]).collect();
            observer(&StepView {
                repetition,
                step,
                labeled: &labeled,
                unlabeled: &unlabeled,
                pool: &pool,
                batch: &chosen,
                labels_read: &oracle.reads,
            });
            for &i in &chosen {
                oracle.reveal(i);
                is_labeled[i] = true;
                labeled.push(i);
            }
            unlabeled.retain(|&i| !is_labeled[i]);
            if labeled.len() + unlabeled.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "labeled and unlabeled sets no longer partition the training set at step {step}"
                )));
            }
            secs = started.elapsed().as_secs_f64();
        }
        let secs = if cfg.record_timing { secs } else { 0.0 };
        let labeled_count = if step < cfg.steps {
            labeled.len() - cfg.query_size
        } else {
            labeled.len()
        };
        out.records
            .push(record(step, labeled_count, Some(accuracy), secs, None));
        model = Some(current);
    }
    Ok(out)
}

/// All repetitions, run concurrently and returned in repetition order.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    opts: RunOptions,
) -> Result<Vec<RepetitionOutcome>> {
    cfg.validate()?;
    (0..cfg.repetitions)
        .into_par_iter()
        .map(|r| run_repetition(cfg, data, r, opts, &mut |_| {}))
        .collect()
}

/// Prepare the data and run every repetition; records are ordered by
/// repetition, then step.
pub fn al_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    let data = prepare_data(cfg)?;
    Ok(run_experiment(cfg, &data, RunOptions::default())?
        .into_iter()
        .flat_map(|o| o.records)
        .collect())
}
