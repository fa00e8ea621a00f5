//! Flat `section.key = value` experiment configuration.
//!
//! ```text
//! # comments and blank lines are ignored
//! dataset.kind = disk2d
//! dataset.size = 1500
//! model.kind = linear2d
//! experiment.strategy = ldm-s
//! experiment.query_size = 1
//! ```
//!
//! Every field has a default, so a config file only lists what it changes.
//! [`ExperimentConfig::to_text`] renders every key and is what the config
//! hash is computed over.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use super::dataset::{BlobsParams, Disk2dParams};
use crate::acquisition::Strategy;
use crate::error::{Error, Result};
use crate::estimator::{default_sigma_ladder, EstimatorConfig};
use crate::model::{ModelKind, ModelSpec, Optimizer, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Disk2d,
    Blobs,
    Csv,
}

impl DatasetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetKind::Disk2d => "disk2d",
            DatasetKind::Blobs => "blobs",
            DatasetKind::Csv => "csv",
        }
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "disk2d" => Ok(DatasetKind::Disk2d),
            "blobs" => Ok(DatasetKind::Blobs),
            "csv" => Ok(DatasetKind::Csv),
            _ => Err(Error::InvalidConfig(format!("unknown dataset kind `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    /// Name used in records; defaults to the kind or the CSV file stem.
    pub id: Option<String>,
    pub path: Option<PathBuf>,
    pub label_column: String,
    /// Points generated by the synthetic kinds (before the split).
    pub size: usize,
    pub disk: Disk2dParams,
    pub blobs: BlobsParams,
    pub train_fraction: f64,
    /// Seeds generation and the train/test split. Independent of the
    /// master seed so every repetition sees the same data.
    pub seed: u64,
}

impl DatasetConfig {
    pub fn dataset_id(&self) -> String {
        if let Some(id) = &self.id {
            return id.clone();
        }
        match (&self.kind, &self.path) {
            (DatasetKind::Csv, Some(p)) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "csv".into()),
            (k, _) => k.as_str().into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub hidden_dim: Option<usize>,
    /// When set, must match the dataset's feature dimension.
    pub input_dim: Option<usize>,
}

impl ModelConfig {
    /// Concrete spec for data of the given shape.
    pub fn spec(&self, input_dim: usize, num_classes: usize, seed: u64) -> Result<ModelSpec> {
        if let Some(d) = self.input_dim {
            if d != input_dim {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: input_dim,
                });
            }
        }
        let spec = match self.kind {
            ModelKind::Linear2D => ModelSpec {
                input_dim,
                num_classes,
                ..ModelSpec::linear_2d(seed)
            },
            ModelKind::Logistic => ModelSpec::logistic(input_dim, num_classes, seed),
            ModelKind::Mlp => ModelSpec::mlp(
                input_dim,
                self.hidden_dim.ok_or_else(|| {
                    Error::InvalidConfig("model.hidden_dim is required for mlp".into())
                })?,
                num_classes,
                seed,
            ),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    /// The seed field is replaced per repetition and step.
    pub train: TrainConfig,
    pub warm_start: bool,
    /// The seed field is replaced per repetition and step; `mc_size` caps
    /// the Monte-Carlo subsample of each pool.
    pub estimator: EstimatorConfig,
    pub strategy: Strategy,
    /// Size of the stratified initial labeled set.
    pub initial_labeled: usize,
    /// When set, overrides `initial_labeled` with this many per class.
    pub initial_per_class: Option<usize>,
    pub pool_size: usize,
    pub query_size: usize,
    pub steps: usize,
    pub repetitions: usize,
    pub master_seed: u64,
    /// Measure wall time per step. Off by default because timings make
    /// the record stream non-reproducible.
    pub record_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetConfig {
                kind: DatasetKind::Disk2d,
                id: None,
                path: None,
                label_column: "label".into(),
                size: 1000,
                disk: Disk2dParams::default(),
                blobs: BlobsParams::default(),
                train_fraction: 0.8,
                seed: 0,
            },
            model: ModelConfig {
                kind: ModelKind::Linear2D,
                hidden_dim: None,
                input_dim: None,
            },
            train: TrainConfig::default(),
            warm_start: false,
            estimator: EstimatorConfig::default(),
            strategy: Strategy::LdmS,
            initial_labeled: 6,
            initial_per_class: None,
            pool_size: 500,
            query_size: 1,
            steps: 10,
            repetitions: 1,
            master_seed: 0,
            record_timing: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::InvalidConfig(format!(
            "{key}: expected a boolean, got `{value}`"
        ))),
    }
}

fn parse_optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value.eq_ignore_ascii_case("none") || value.is_empty() {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn join(values: &[f64], sep: &str) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(sep)
}

impl ExperimentConfig {
    /// Parse a config file on top of the defaults.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse_text(&text, Some(path))
    }

    pub fn parse_text(text: &str, path: Option<&Path>) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: path.map(Path::to_path_buf).unwrap_or_default(),
                line: i + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `section.key = value`, got `{line}`")))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key `{key}`")));
            }
            cfg.set(key, value.trim()).map_err(|e| err(e.to_string()))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Apply `key=value` overrides, then re-validate.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let (k, v) = o.as_ref().split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("override `{}` is not key=value", o.as_ref()))
            })?;
            self.set(k.trim(), v.trim())?;
        }
        self.validate()
    }

    /// Set one field by its flat key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let d = &mut self.dataset;
        match key {
            "dataset.kind" => d.kind = value.parse()?,
            "dataset.id" => d.id = parse_optional(key, value)?,
            "dataset.path" => d.path = parse_optional(key, value)?,
            "dataset.label_column" => d.label_column = value.to_string(),
            "dataset.size" => d.size = parse(key, value)?,
            "dataset.noise" => d.disk.noise = parse(key, value)?,
            "dataset.normal_angle" => d.disk.normal_angle = parse(key, value)?,
            "dataset.classes" => d.blobs.classes = parse(key, value)?,
            "dataset.dim" => d.blobs.dim = parse(key, value)?,
            "dataset.std" => d.blobs.std = parse(key, value)?,
            "dataset.gap" => d.blobs.gap = parse(key, value)?,
            "dataset.centers" => {
                d.blobs.centers = if value.eq_ignore_ascii_case("none") || value.is_empty() {
                    None
                } else {
                    Some(
                        value
                            .split(';')
                            .map(|c| parse_list(key, c))
                            .collect::<Result<_>>()?,
                    )
                }
            }
            "dataset.train_fraction" => d.train_fraction = parse(key, value)?,
            "dataset.seed" => d.seed = parse(key, value)?,
            "model.kind" => self.model.kind = value.parse()?,
            "model.hidden_dim" => self.model.hidden_dim = parse_optional(key, value)?,
            "model.input_dim" => self.model.input_dim = parse_optional(key, value)?,
            "train.epochs" => self.train.epochs = parse(key, value)?,
            "train.batch_size" => self.train.batch_size = parse(key, value)?,
            "train.optimizer" => self.train.optimizer = value.parse::<Optimizer>()?,
            "train.learning_rate" => self.train.learning_rate = parse(key, value)?,
            "train.warm_start" => self.warm_start = parse_bool(key, value)?,
            "estimator.sigma_ladder" => {
                self.estimator.sigma_ladder = if value.eq_ignore_ascii_case("default") {
                    default_sigma_ladder()
                } else {
                    parse_list(key, value)?
                }
            }
            "estimator.stop_condition" => self.estimator.stop_condition = parse(key, value)?,
            "estimator.mc_size" => self.estimator.mc_size = parse(key, value)?,
            "estimator.perturb_bias" => self.estimator.perturb_bias = parse_bool(key, value)?,
            "experiment.strategy" => self.strategy = value.parse()?,
            "experiment.initial_labeled" => self.initial_labeled = parse(key, value)?,
            "experiment.initial_per_class" => self.initial_per_class = parse_optional(key, value)?,
            "experiment.pool_size" => self.pool_size = parse(key, value)?,
            "experiment.query_size" => self.query_size = parse(key, value)?,
            "experiment.steps" => self.steps = parse(key, value)?,
            "experiment.repetitions" => self.repetitions = parse(key, value)?,
            "experiment.master_seed" => self.master_seed = parse(key, value)?,
            "experiment.record_timing" => self.record_timing = parse_bool(key, value)?,
            _ => return Err(Error::InvalidConfig(format!("unknown key `{key}`"))),
        }
        d.disk.n = d.size;
        d.blobs.n = d.size;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.dataset.kind == DatasetKind::Csv && self.dataset.path.is_none() {
            return bad("dataset.path is required for csv datasets");
        }
        if !(self.dataset.train_fraction > 0.0 && self.dataset.train_fraction < 1.0) {
            return bad("dataset.train_fraction must lie in (0, 1)");
        }
        if self.query_size == 0 || self.pool_size == 0 || self.steps == 0 || self.repetitions == 0 {
            return bad("query_size, pool_size, steps and repetitions must be positive");
        }
        if self.query_size > self.pool_size {
            return bad("query_size must not exceed pool_size");
        }
        if self.initial_per_class == Some(0)
            || (self.initial_per_class.is_none() && self.initial_labeled == 0)
        {
            return bad("the initial labeled set must be non-empty");
        }
        self.train.validate()?;
        self.estimator.validate()?;
        Ok(())
    }

    /// Every key with its current value, one per line, in a fixed order.
    pub fn to_text(&self) -> String {
        let d = &self.dataset;
        let opt = |v: Option<String>| v.unwrap_or_else(|| "none".into());
        let ladder = if self.estimator.sigma_ladder == default_sigma_ladder() {
            "default".to_string()
        } else {
            join(&self.estimator.sigma_ladder, ",")
        };
        let centers = d.blobs.centers.as_ref().map(|cs| {
            cs.iter()
                .map(|c| join(c, ","))
                .collect::<Vec<_>>()
                .join(";")
        });
        let entries: Vec<(&str, String)> = vec![
            ("dataset.kind", d.kind.as_str().into()),
            ("dataset.id", opt(d.id.clone())),
            (
                "dataset.path",
                opt(d.path.as_ref().map(|p| p.display().to_string())),
            ),
            ("dataset.label_column", d.label_column.clone()),
            ("dataset.size", d.size.to_string()),
            ("dataset.noise", d.disk.noise.to_string()),
            ("dataset.normal_angle", d.disk.normal_angle.to_string()),
            ("dataset.classes", d.blobs.classes.to_string()),
            ("dataset.dim", d.blobs.dim.to_string()),
            ("dataset.std", d.blobs.std.to_string()),
            ("dataset.gap", d.blobs.gap.to_string()),
            ("dataset.centers", opt(centers)),
            ("dataset.train_fraction", d.train_fraction.to_string()),
            ("dataset.seed", d.seed.to_string()),
            ("model.kind", self.model.kind.to_string()),
            (
                "model.hidden_dim",
                opt(self.model.hidden_dim.map(|v| v.to_string())),
            ),
            (
                "model.input_dim",
                opt(self.model.input_dim.map(|v| v.to_string())),
            ),
            ("train.epochs", self.train.epochs.to_string()),
            ("train.batch_size", self.train.batch_size.to_string()),
            ("train.optimizer", self.train.optimizer.to_string()),
            ("train.learning_rate", self.train.learning_rate.to_string()),
            ("train.warm_start", self.warm_start.to_string()),
            ("estimator.sigma_ladder", ladder),
            (
                "estimator.stop_condition",
                self.estimator.stop_condition.to_string(),
            ),
            ("estimator.mc_size", self.estimator.mc_size.to_string()),
            (
                "estimator.perturb_bias",
                self.estimator.perturb_bias.to_string(),
            ),
            ("experiment.strategy", self.strategy.to_string()),
            (
                "experiment.initial_labeled",
                self.initial_labeled.to_string(),
            ),
            (
                "experiment.initial_per_class",
                opt(self.initial_per_class.map(|v| v.to_string())),
            ),
            ("experiment.pool_size", self.pool_size.to_string()),
            ("experiment.query_size", self.query_size.to_string()),
            ("experiment.steps", self.steps.to_string()),
            ("experiment.repetitions", self.repetitions.to_string()),
            ("experiment.master_seed", self.master_seed.to_string()),
            ("experiment.record_timing", self.record_timing.to_string()),
        ];
        let mut s = String::new();
        for (k, v) in entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// First 16 hex digits of the SHA-256 of [`Self::to_text`].
    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
