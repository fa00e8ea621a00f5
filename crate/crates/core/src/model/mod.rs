//! Parametric classifiers.
//!
//! Three model families share one flat parameter store:
//!
//! | kind       | layout                         | final layer  | features `z_x`    |
//! |------------|--------------------------------|--------------|-------------------|
//! | `Linear2D` | `w[2]`                         | `w`          | `x`               |
//! | `Logistic` | `w[C×d] b[C]`                  | `w, b`       | `x`               |
//! | `Mlp`      | `w1[H×d] b1[H] w2[C×H] b2[C]`  | `w2, b2`     | `relu(w1 x + b1)` |
//!
//! `Linear2D` is the bias-free sign classifier `h(x) = 1[x·w > 0]`, scored as
//! the two-class logit pair `(0, x·w)`. Weight matrices are row-major with one
//! row per output unit.

mod checkpoint;
mod train;

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use train::{loss_and_gradient, train, train_from, Optimizer, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Linear2D,
    Logistic,
    Mlp,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Linear2D => "linear2d",
            ModelKind::Logistic => "logistic",
            ModelKind::Mlp => "mlp",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear2d" | "linear" => Ok(ModelKind::Linear2D),
            "logistic" => Ok(ModelKind::Logistic),
            "mlp" => Ok(ModelKind::Mlp),
            other => Err(Error::InvalidSpec(format!("unknown model kind `{other}`"))),
        }
    }
}

/// Architecture of a classifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input_dim: usize,
    pub num_classes: usize,
    /// Present iff `kind == Mlp`.
    pub hidden_dim: Option<usize>,
    /// Seed used by [`TrainedModel::initialize`].
    pub seed: u64,
}

impl ModelSpec {
    pub fn linear_2d(seed: u64) -> Self {
        Self {
            kind: ModelKind::Linear2D,
            input_dim: 2,
            num_classes: 2,
            hidden_dim: None,
            seed,
        }
    }

    pub fn logistic(input_dim: usize, num_classes: usize, seed: u64) -> Self {
        Self {
            kind: ModelKind::Logistic,
            input_dim,
            num_classes,
            hidden_dim: None,
            seed,
        }
    }

    pub fn mlp(input_dim: usize, hidden_dim: usize, num_classes: usize, seed: u64) -> Self {
        Self {
            kind: ModelKind::Mlp,
            input_dim,
            num_classes,
            hidden_dim: Some(hidden_dim),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidSpec("input_dim must be positive".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::InvalidSpec("num_classes must be at least 2".into()));
        }
        match (self.kind, self.hidden_dim) {
            (ModelKind::Mlp, Some(0)) => {
                Err(Error::InvalidSpec("hidden_dim must be positive".into()))
            }
            (ModelKind::Mlp, None) => Err(Error::InvalidSpec("mlp requires hidden_dim".into())),
            (ModelKind::Mlp, Some(_)) => Ok(()),
            (_, Some(_)) => Err(Error::InvalidSpec(
                "hidden_dim is only valid for mlp models".into(),
            )),
            (ModelKind::Linear2D, None) => {
                if self.num_classes != 2 {
                    Err(Error::InvalidSpec("linear2d is binary".into()))
                } else if self.input_dim != 2 {
                    Err(Error::InvalidSpec("linear2d takes 2D inputs".into()))
                } else {
                    Ok(())
                }
            }
            (ModelKind::Logistic, None) => Ok(()),
        }
    }

    /// Width of the penultimate representation `z_x`.
    pub fn feature_dim(&self) -> usize {
        match self.kind {
            ModelKind::Mlp => self.hidden_dim.unwrap_or(0),
            _ => self.input_dim,
        }
    }

    /// Named parameter segments in storage order.
    pub fn layout(&self) -> Vec<Segment> {
        let d = self.input_dim;
        let c = self.num_classes;
        let mut segs = Vec::new();
        let mut push = |name: &'static str, len: usize, fan_in: usize, is_bias: bool| {
            let start = segs.last().map_or(0, |s: &Segment| s.span.end);
            segs.push(Segment {
                name,
                span: start..start + len,
                fan_in,
                is_bias,
            });
        };
        match self.kind {
            ModelKind::Linear2D => push("w", d, d, false),
            ModelKind::Logistic => {
                push("w", c * d, d, false);
                push("b", c, d, true);
            }
            ModelKind::Mlp => {
                let h = self.hidden_dim.unwrap_or(0);
                push("w1", h * d, d, false);
                push("b1", h, d, true);
                push("w2", c * h, h, false);
                push("b2", c, h, true);
            }
        }
        segs
    }

    pub fn param_count(&self) -> usize {
        self.layout().last().map_or(0, |s| s.span.end)
    }
}

/// One named span of a [`ParamVector`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub name: &'static str,
    pub span: Range<usize>,
    pub fan_in: usize,
    pub is_bias: bool,
}

/// Flat parameter store.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub layout: Vec<Segment>,
}

impl ParamVector {
    pub fn segment(&self, name: &str) -> Option<&[f64]> {
        self.layout
            .iter()
            .find(|s| s.name == name)
            .map(|s| &self.values[s.span.clone()])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Which entries of the final layer get Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PerturbScope {
    pub include_bias: bool,
}

impl Default for PerturbScope {
    fn default() -> Self {
        Self { include_bias: true }
    }
}

/// An immutable classifier: spec plus parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    spec: ModelSpec,
    params: ParamVector,
    last_layer: Range<usize>,
    last_weights: Range<usize>,
}

impl TrainedModel {
    pub fn new(spec: ModelSpec, values: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        let layout = spec.layout();
        let expected = layout.last().map_or(0, |s| s.span.end);
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "parameter {i} is not finite"
            )));
        }
        let (last_layer, last_weights) = match spec.kind {
            ModelKind::Linear2D => (layout[0].span.clone(), layout[0].span.clone()),
            ModelKind::Logistic => (
                layout[0].span.start..layout[1].span.end,
                layout[0].span.clone(),
            ),
            ModelKind::Mlp => (
                layout[2].span.start..layout[3].span.end,
                layout[2].span.clone(),
            ),
        };
        Ok(Self {
            spec,
            params: ParamVector { values, layout },
            last_layer,
            last_weights,
        })
    }

    /// He-normal initialisation from `spec.seed`.
    pub fn initialize(spec: ModelSpec) -> Result<Self> {
        let seed = spec.seed;
        Self::initialize_with_seed(spec, seed)
    }

    /// He-normal weights (`std = sqrt(2 / fan_in)`), zero biases.
    pub fn initialize_with_seed(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut stream = rng::stream(seed);
        let layout = spec.layout();
        let mut values = vec![0.0; spec.param_count()];
        for seg in &layout {
            if seg.is_bias {
                continue;
            }
            let std = (2.0 / seg.fan_in as f64).sqrt();
            for v in &mut values[seg.span.clone()] {
                let xi: f64 = stream.sample(StandardNormal);
                *v = std * xi;
            }
        }
        Self::new(spec, values)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    /// Index range of the final layer's weights and bias within the parameters.
    pub fn last_layer_span(&self) -> Range<usize> {
        self.last_layer.clone()
    }

    /// The final layer's parameters (`v` restricted to the perturbed layer).
    pub fn head(&self) -> &[f64] {
        &self.params.values[self.last_layer.clone()]
    }

    pub fn num_classes(&self) -> usize {
        self.spec.num_classes
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.spec.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.spec.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Penultimate representation `z_x`: hidden activations for the MLP,
    /// the input itself otherwise.
    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self.features_unchecked(x))
    }

    pub(crate) fn features_unchecked(&self, x: &[f64]) -> Vec<f64> {
        match self.spec.kind {
            ModelKind::Linear2D | ModelKind::Logistic => x.to_vec(),
            ModelKind::Mlp => {
                let d = self.spec.input_dim;
                let w1 = &self.params.values[self.params.layout[0].span.clone()];
                let b1 = &self.params.values[self.params.layout[1].span.clone()];
                w1.chunks_exact(d)
                    .zip(b1)
                    .map(|(row, b)| (dot(row, x) + b).max(0.0))
                    .collect()
            }
        }
    }

    /// Features for many inputs.
    pub fn features_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        xs.iter().map(|x| self.features(x)).collect()
    }

    /// Class scores (logits) computed from features with an arbitrary final
    /// layer `head` laid out like [`TrainedModel::head`].
    pub fn head_scores(&self, head: &[f64], z: &[f64], out: &mut [f64]) {
        match self.spec.kind {
            ModelKind::Linear2D => {
                out[0] = 0.0;
                out[1] = dot(head, z);
            }
            _ => {
                let c = self.spec.num_classes;
                let f = z.len();
                let (w, b) = head.split_at(c * f);
                for ((o, row), bias) in out.iter_mut().zip(w.chunks_exact(f)).zip(b) {
                    *o = dot(row, z) + bias;
                }
            }
        }
    }

    /// Predicted class from features under final layer `head`.
    pub fn head_predict(&self, head: &[f64], z: &[f64]) -> usize {
        match self.spec.kind {
            ModelKind::Linear2D => usize::from(dot(head, z) > 0.0),
            _ => {
                let c = self.spec.num_classes;
                let f = z.len();
                let (w, b) = head.split_at(c * f);
                let mut best = 0;
                let mut best_score = f64::NEG_INFINITY;
                for (k, (row, bias)) in w.chunks_exact(f).zip(b).enumerate() {
                    let s = dot(row, z) + bias;
                    if s > best_score {
                        best = k;
                        best_score = s;
                    }
                }
                best
            }
        }
    }

    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        let z = self.features(x)?;
        let mut out = vec![0.0; self.spec.num_classes];
        self.head_scores(self.head(), &z, &mut out);
        Ok(out)
    }

    /// Argmax of the class scores; ties go to the lowest class index.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let z = self.features(x)?;
        Ok(self.head_predict(self.head(), &z))
    }

    pub fn predict_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<usize>> {
        xs.iter().map(|x| self.predict(x)).collect()
    }

    /// Softmax of the class scores.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut s = self.scores(x)?;
        softmax_in_place(&mut s);
        Ok(s)
    }

    pub fn predict_proba_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        xs.iter().map(|x| self.predict_proba(x)).collect()
    }

    /// Fraction of `xs` predicted as `ys`.
    pub fn accuracy(&self, xs: &[Vec<f64>], ys: &[usize]) -> Result<f64> {
        if xs.len() != ys.len() {
            return Err(Error::DimensionMismatch {
                expected: xs.len(),
                got: ys.len(),
            });
        }
        if xs.is_empty() {
            return Err(Error::Empty("evaluation set"));
        }
        let mut hits = 0usize;
        for (x, &y) in xs.iter().zip(ys) {
            if self.predict(x)? == y {
                hits += 1;
            }
        }
        Ok(hits as f64 / xs.len() as f64)
    }

    /// Fill `out` with `head + sigma·ξ` for the entries in `scope`, where `ξ`
    /// are independent standard normals drawn from `rng` in storage order.
    pub fn draw_head<R: Rng + ?Sized>(
        &self,
        sigma: f64,
        scope: PerturbScope,
        rng: &mut R,
        out: &mut Vec<f64>,
    ) {
        out.clear();
        out.extend_from_slice(self.head());
        let noisy = if scope.include_bias {
            out.len()
        } else {
            self.last_weights.len()
        };
        for v in &mut out[..noisy] {
            let xi: f64 = rng.sample(StandardNormal);
            *v += sigma * xi;
        }
    }

    /// A copy whose final layer is `v + sigma·ξ`; all other parameters are
    /// shared bit-for-bit with `self`.
    pub fn perturb_last_layer<R: Rng + ?Sized>(&self, sigma: f64, rng: &mut R) -> Result<Self> {
        self.perturb_last_layer_with(sigma, PerturbScope::default(), rng)
    }

    pub fn perturb_last_layer_with<R: Rng + ?Sized>(
        &self,
        sigma: f64,
        scope: PerturbScope,
        rng: &mut R,
    ) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma must be positive and finite, got {sigma}"
            )));
        }
        let mut head = Vec::with_capacity(self.last_layer.len());
        self.draw_head(sigma, scope, rng, &mut head);
        Ok(self.with_head(&head))
    }

    /// Same model with the final layer replaced.
    pub fn with_head(&self, head: &[f64]) -> Self {
        let mut out = self.clone();
        out.params.values[self.last_layer.clone()].copy_from_slice(head);
        out
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn softmax_in_place(s: &mut [f64]) {
    let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in s.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in s.iter_mut() {
        *v /= total;
    }
}
