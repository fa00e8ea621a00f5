//! In-memory datasets, CSV ingestion and synthetic generators.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng;
use crate::testbed;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        if features.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.len(),
                got: labels.len(),
            });
        }
        let dim = features[0].len();
        if dim == 0 {
            return Err(Error::InvalidArgument("zero-dimensional features".into()));
        }
        if let Some(bad) = features.iter().find(|x| x.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
        if let Some(&label) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::LabelOutOfRange { label, num_classes });
        }
        Ok(Self {
            features,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }

    /// CSV with columns `x0..x{d-1},label`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.dim()).map(|j| format!("x{j}")).collect();
        header.push("label".into());
        w.write_record(&header)?;
        for (x, y) in self.features.iter().zip(&self.labels) {
            let mut rec: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            rec.push(y.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
    /// Original label of each remapped class (`label_map[c]` became `c`).
    pub label_map: Vec<i64>,
}

/// Shuffle with `seed` and put `round(n · train_fraction)` rows in train.
pub fn split_dataset(data: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split fraction {train_fraction} outside (0, 1)"
        )));
    }
    let n = data.len();
    let n_train = (n as f64 * train_fraction).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::InvalidArgument(format!(
            "split fraction {train_fraction} leaves an empty side for {n} rows"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed));
    Ok((
        data.subset(&order[..n_train]),
        data.subset(&order[n_train..]),
    ))
}

/// Read a headered numeric CSV and split it. See [`load_labeled_csv`].
pub fn load_dataset_csv(
    path: impl AsRef<Path>,
    label_column: &str,
    train_fraction: f64,
    seed: u64,
) -> Result<Split> {
    let (data, label_map) = load_labeled_csv(path, label_column)?;
    let (train, test) = split_dataset(&data, train_fraction, seed)?;
    Ok(Split {
        train,
        test,
        label_map,
    })
}

/// Every column except `label_column` is a feature; labels are integers
/// remapped to `0..C` in ascending order. Returns the data and the original
/// label of each class.
pub fn load_labeled_csv(path: impl AsRef<Path>, label_column: &str) -> Result<(Dataset, Vec<i64>)> {
    let path = path.as_ref();
    let table = read_numeric_csv(path, Some(label_column), true)?;
    let raw_labels: Vec<i64> = table.labels.expect("label column requested");
    let label_map: Vec<i64> = raw_labels
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let labels = raw_labels
        .iter()
        .map(|y| label_map.binary_search(y).expect("label collected above"))
        .collect();
    Ok((
        Dataset::new(table.features, labels, label_map.len())?,
        label_map,
    ))
}

/// Feature rows of a headered numeric CSV, skipping `ignore_column` if the
/// file has it.
pub fn load_features_csv(
    path: impl AsRef<Path>,
    ignore_column: Option<&str>,
) -> Result<Vec<Vec<f64>>> {
    Ok(read_numeric_csv(path.as_ref(), ignore_column, false)?.features)
}

struct NumericTable {
    features: Vec<Vec<f64>>,
    labels: Option<Vec<i64>>,
}

fn read_numeric_csv(
    path: &Path,
    label_column: Option<&str>,
    label_required: bool,
) -> Result<NumericTable> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let label_idx = label_column.and_then(|name| headers.iter().position(|h| h == name));
    if label_required && label_idx.is_none() {
        return Err(parse_err(
            1,
            format!("no column named `{}`", label_column.unwrap_or_default()),
        ));
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let mut x = Vec::with_capacity(record.len());
        for (j, cell) in record.iter().enumerate() {
            if Some(j) == label_idx {
                if label_required {
                    let y = cell.parse::<i64>().map_err(|_| {
                        parse_err(line, format!("label `{cell}` is not an integer"))
                    })?;
                    labels.push(y);
                }
            } else {
                let v = cell
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        parse_err(
                            line,
                            format!("column `{}`: `{cell}` is not a finite number", &headers[j]),
                        )
                    })?;
                x.push(v);
            }
        }
        features.push(x);
    }
    if features.is_empty() {
        return Err(Error::Empty("CSV dataset"));
    }
    Ok(NumericTable {
        features,
        labels: label_required.then_some(labels),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disk2dParams {
    pub n: usize,
    /// Probability of flipping each label.
    pub noise: f64,
    /// Direction of the hidden separator's normal, in radians.
    pub normal_angle: f64,
}

impl Default for Disk2dParams {
    fn default() -> Self {
        Self {
            n: 1000,
            noise: 0.0,
            normal_angle: 0.5,
        }
    }
}

/// Uniform points on the unit disk labelled by `I[x · u > 0]` for the unit
/// normal `u`, with labels flipped at rate `noise`.
pub fn generate_disk2d(params: &Disk2dParams, seed: u64) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&params.noise) {
        return Err(Error::InvalidArgument(format!(
            "noise rate {} outside [0, 1]",
            params.noise
        )));
    }
    let mut stream = rng::stream(seed);
    let sample = testbed::sample_disk(params.n, &mut stream)?;
    let u = [params.normal_angle.cos(), params.normal_angle.sin()];
    let labels = sample
        .points
        .iter()
        .map(|p| {
            let y = usize::from(p[0] * u[0] + p[1] * u[1] > 0.0);
            if params.noise > 0.0 && stream.random::<f64>() < params.noise {
                1 - y
            } else {
                y
            }
        })
        .collect();
    Dataset::new(sample.to_vectors(), labels, 2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlobsParams {
    pub n: usize,
    pub classes: usize,
    pub dim: usize,
    pub std: f64,
    /// Distance between neighbouring centres placed on a circle in the first
    /// two coordinates. Ignored when `centers` is given.
    pub gap: f64,
    pub centers: Option<Vec<Vec<f64>>>,
}

impl Default for BlobsParams {
    fn default() -> Self {
        Self {
            n: 1000,
            classes: 3,
            dim: 2,
            std: 1.0,
            gap: 10.0,
            centers: None,
        }
    }
}

impl BlobsParams {
    pub fn resolved_centers(&self) -> Result<Vec<Vec<f64>>> {
        if let Some(c) = &self.centers {
            if c.len() != self.classes || c.iter().any(|m| m.len() != self.dim) {
                return Err(Error::InvalidArgument(format!(
                    "expected {} centres of dimension {}",
                    self.classes, self.dim
                )));
            }
            return Ok(c.clone());
        }
        if self.dim < 2 && self.classes > 2 {
            return Err(Error::InvalidArgument(
                "circle placement needs dim >= 2 for more than two classes".into(),
            ));
        }
        let radius = self.gap / (2.0 * (std::f64::consts::PI / self.classes as f64).sin());
        Ok((0..self.classes)
            .map(|c| {
                let a = 2.0 * std::f64::consts::PI * c as f64 / self.classes as f64;
                let mut m = vec![0.0; self.dim];
                m[0] = radius * a.cos();
                if self.dim > 1 {
                    m[1] = radius * a.sin();
                }
                m
            })
            .collect())
    }
}

/// Isotropic Gaussian clusters; point `i` belongs to class `i mod C`.
pub fn generate_blobs(params: &BlobsParams, seed: u64) -> Result<Dataset> {
    if params.classes < 2 || params.dim == 0 || params.n < params.classes {
        return Err(Error::InvalidArgument(
            "blobs need at least two classes, one dimension and one point per class".into(),
        ));
    }
    if !(params.std > 0.0 && params.std.is_finite()) {
        return Err(Error::InvalidArgument("blob std must be positive".into()));
    }
    let centers = params.resolved_centers()?;
    let mut stream = rng::stream(seed);
    let mut features = Vec::with_capacity(params.n);
    let mut labels = Vec::with_capacity(params.n);
    for i in 0..params.n {
        let c = i % params.classes;
        let x = centers[c]
            .iter()
            .map(|m| {
                let z: f64 = StandardNormal.sample(&mut stream);
                m + params.std * z
            })
            .collect();
        features.push(x);
        labels.push(c);
    }
    Dataset::new(features, labels, params.classes)
}
