use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;

use super::{dot, softmax_in_place, ModelKind, ModelSpec, TrainedModel};
use crate::error::{Error, Result};
use crate::rng;

const STREAM_INIT: u64 = 0;
const STREAM_SHUFFLE: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    Sgd,
    /// Adam with β1 = 0.9, β2 = 0.999, ε = 1e-8.
    Adam,
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Optimizer::Sgd => "sgd",
            Optimizer::Adam => "adam",
        })
    }
}

impl FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(Optimizer::Sgd),
            "adam" => Ok(Optimizer::Adam),
            other => Err(Error::InvalidConfig(format!("unknown optimizer `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            optimizer: Optimizer::Adam,
            learning_rate: 0.01,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(
                "learning_rate must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Train from a He-normal initialisation drawn from `cfg.seed`.
///
/// Mini-batch gradient descent on the mean cross-entropy; batches are
/// reshuffled every epoch from a stream derived from `cfg.seed`, so the
/// result is a pure function of the inputs.
pub fn train(
    xs: &[Vec<f64>],
    ys: &[usize],
    spec: &ModelSpec,
    cfg: &TrainConfig,
) -> Result<TrainedModel> {
    let init = TrainedModel::initialize_with_seed(
        spec.clone(),
        rng::derive_key(cfg.seed, &[STREAM_INIT]),
    )?;
    train_from(xs, ys, &init, cfg)
}

/// Continue training from `init` (warm start).
pub fn train_from(
    xs: &[Vec<f64>],
    ys: &[usize],
    init: &TrainedModel,
    cfg: &TrainConfig,
) -> Result<TrainedModel> {
    cfg.validate()?;
    let spec = init.spec();
    check_data(xs, ys, spec)?;
    if cfg.epochs == 0 {
        return Ok(init.clone());
    }
    if xs.is_empty() {
        return Err(Error::Empty("training data"));
    }

    let mut params = init.params().values.clone();
    let mut opt = OptimizerState::new(cfg, params.len());
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut grad = vec![0.0; params.len()];
    let mut scratch = Scratch::new(spec);

    for epoch in 0..cfg.epochs {
        let mut stream = rng::substream(cfg.seed, &[STREAM_SHUFFLE, epoch as u64]);
        order.shuffle(&mut stream);
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut loss = 0.0;
            for &i in batch {
                loss += accumulate(spec, &params, &xs[i], ys[i], &mut grad, &mut scratch);
            }
            let scale = 1.0 / batch.len() as f64;
            loss *= scale;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            grad.iter_mut().for_each(|g| *g *= scale);
            opt.step(&mut params, &grad);
            if params.iter().any(|p| !p.is_finite()) {
                return Err(Error::Diverged { epoch });
            }
        }
    }
    TrainedModel::new(spec.clone(), params)
}

/// Mean cross-entropy over `(xs, ys)` and its gradient with respect to the
/// flat parameter vector of `model`.
pub fn loss_and_gradient(
    model: &TrainedModel,
    xs: &[Vec<f64>],
    ys: &[usize],
) -> Result<(f64, Vec<f64>)> {
    let spec = model.spec();
    check_data(xs, ys, spec)?;
    if xs.is_empty() {
        return Err(Error::Empty("training data"));
    }
    let params = &model.params().values;
    let mut grad = vec![0.0; params.len()];
    let mut scratch = Scratch::new(spec);
    let mut loss = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        loss += accumulate(spec, params, x, y, &mut grad, &mut scratch);
    }
    let scale = 1.0 / xs.len() as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok((loss * scale, grad))
}

fn check_data(xs: &[Vec<f64>], ys: &[usize], spec: &ModelSpec) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    for x in xs {
        if x.len() != spec.input_dim {
            return Err(Error::DimensionMismatch {
                expected: spec.input_dim,
                got: x.len(),
            });
        }
    }
    if let Some(&label) = ys.iter().find(|&&y| y >= spec.num_classes) {
        return Err(Error::LabelOutOfRange {
            label,
            num_classes: spec.num_classes,
        });
    }
    Ok(())
}

struct Scratch {
    hidden_pre: Vec<f64>,
    hidden: Vec<f64>,
    scores: Vec<f64>,
    dhidden: Vec<f64>,
}

impl Scratch {
    fn new(spec: &ModelSpec) -> Self {
        let h = spec.hidden_dim.unwrap_or(0);
        Self {
            hidden_pre: vec![0.0; h],
            hidden: vec![0.0; h],
            scores: vec![0.0; spec.num_classes],
            dhidden: vec![0.0; h],
        }
    }
}

/// Add the gradient of `-log p_y(x)` to `grad`; return the loss.
fn accumulate(
    spec: &ModelSpec,
    params: &[f64],
    x: &[f64],
    y: usize,
    grad: &mut [f64],
    s: &mut Scratch,
) -> f64 {
    let d = spec.input_dim;
    let c = spec.num_classes;
    match spec.kind {
        ModelKind::Linear2D => {
            let logit = dot(params, x);
            // -log σ(±logit), computed stably
            let signed = if y == 1 { logit } else { -logit };
            let loss = softplus(-signed);
            let p1 = sigmoid(logit);
            let r = p1 - y as f64;
            for (g, xi) in grad.iter_mut().zip(x) {
                *g += r * xi;
            }
            loss
        }
        ModelKind::Logistic => {
            let (w, b) = params.split_at(c * d);
            for ((o, row), bias) in s.scores.iter_mut().zip(w.chunks_exact(d)).zip(b) {
                *o = dot(row, x) + bias;
            }
            let loss = cross_entropy_residual(&mut s.scores, y);
            let (gw, gb) = grad.split_at_mut(c * d);
            for k in 0..c {
                let r = s.scores[k];
                for (g, xi) in gw[k * d..(k + 1) * d].iter_mut().zip(x) {
                    *g += r * xi;
                }
                gb[k] += r;
            }
            loss
        }
        ModelKind::Mlp => {
            let h = spec.hidden_dim.unwrap_or(0);
            let (w1, rest) = params.split_at(h * d);
            let (b1, rest) = rest.split_at(h);
            let (w2, b2) = rest.split_at(c * h);
            for j in 0..h {
                let a = dot(&w1[j * d..(j + 1) * d], x) + b1[j];
                s.hidden_pre[j] = a;
                s.hidden[j] = a.max(0.0);
            }
            for k in 0..c {
                s.scores[k] = dot(&w2[k * h..(k + 1) * h], &s.hidden) + b2[k];
            }
            let loss = cross_entropy_residual(&mut s.scores, y);

            let (gw1, grest) = grad.split_at_mut(h * d);
            let (gb1, grest) = grest.split_at_mut(h);
            let (gw2, gb2) = grest.split_at_mut(c * h);
            s.dhidden.iter_mut().for_each(|v| *v = 0.0);
            for k in 0..c {
                let r = s.scores[k];
                let row = &w2[k * h..(k + 1) * h];
                for j in 0..h {
                    gw2[k * h + j] += r * s.hidden[j];
                    s.dhidden[j] += r * row[j];
                }
                gb2[k] += r;
            }
            for j in 0..h {
                if s.hidden_pre[j] <= 0.0 {
                    continue;
                }
                let da = s.dhidden[j];
                for (g, xi) in gw1[j * d..(j + 1) * d].iter_mut().zip(x) {
                    *g += da * xi;
                }
                gb1[j] += da;
            }
            loss
        }
    }
}

/// Replace `scores` by `softmax(scores) - onehot(y)` and return `-log p_y`.
fn cross_entropy_residual(scores: &mut [f64], y: usize) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_norm = max + scores.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    let loss = log_norm - scores[y];
    softmax_in_place(scores);
    scores[y] -= 1.0;
    loss
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

enum OptimizerState {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        m: Vec<f64>,
        v: Vec<f64>,
        t: i32,
    },
}

impl OptimizerState {
    fn new(cfg: &TrainConfig, n: usize) -> Self {
        match cfg.optimizer {
            Optimizer::Sgd => OptimizerState::Sgd {
                lr: cfg.learning_rate,
            },
            Optimizer::Adam => OptimizerState::Adam {
                lr: cfg.learning_rate,
                m: vec![0.0; n],
                v: vec![0.0; n],
                t: 0,
            },
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        match self {
            OptimizerState::Sgd { lr } => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= *lr * g;
                }
            }
            OptimizerState::Adam { lr, m, v, t } => {
                const B1: f64 = 0.9;
                const B2: f64 = 0.999;
                const EPS: f64 = 1e-8;
                *t += 1;
                let c1 = 1.0 - B1.powi(*t);
                let c2 = 1.0 - B2.powi(*t);
                for i in 0..params.len() {
                    m[i] = B1 * m[i] + (1.0 - B1) * grad[i];
                    v[i] = B2 * v[i] + (1.0 - B2) * grad[i] * grad[i];
                    let mh = m[i] / c1;
                    let vh = v[i] / c2;
                    params[i] -= *lr * mh / (vh.sqrt() + EPS);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_data(d: usize, c: usize, n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let xs = (0..n)
            .map(|_| (0..d).map(|_| r.random_range(-1.5..1.5)).collect())
            .collect();
        let ys = (0..n).map(|_| r.random_range(0..c)).collect();
        (xs, ys)
    }

    fn finite_difference_check(spec: ModelSpec, seed: u64) {
        let (xs, ys) = random_data(spec.input_dim, spec.num_classes, 7, seed);
        let model = TrainedModel::initialize(spec.clone()).unwrap();
        // nudge biases off zero so every coordinate is exercised
        let mut values = model.params().values.clone();
        let mut r = ChaCha8Rng::seed_from_u64(seed + 1);
        for v in values.iter_mut() {
            *v += r.random_range(-0.3..0.3);
        }
        let model = TrainedModel::new(spec.clone(), values.clone()).unwrap();
        let (_, grad) = loss_and_gradient(&model, &xs, &ys).unwrap();
        let h = 1e-5;
        for i in 0..values.len() {
            let mut plus = values.clone();
            plus[i] += h;
            let mut minus = values.clone();
            minus[i] -= h;
            let lp = loss_and_gradient(&TrainedModel::new(spec.clone(), plus).unwrap(), &xs, &ys)
                .unwrap()
                .0;
            let lm = loss_and_gradient(&TrainedModel::new(spec.clone(), minus).unwrap(), &xs, &ys)
                .unwrap()
                .0;
            let fd = (lp - lm) / (2.0 * h);
            let denom = fd.abs().max(grad[i].abs()).max(1e-8);
            assert!(
                (fd - grad[i]).abs() / denom <= 1e-4 || (fd - grad[i]).abs() <= 1e-9,
                "{:?} coord {i}: analytic {} vs numeric {fd}",
                spec.kind,
                grad[i]
            );
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..3 {
            finite_difference_check(ModelSpec::linear_2d(seed), seed);
            finite_difference_check(ModelSpec::logistic(3, 4, seed), seed);
            finite_difference_check(ModelSpec::mlp(3, 5, 3, seed), seed);
        }
    }

    #[test]
    fn zero_epochs_returns_initialisation() {
        let spec = ModelSpec::mlp(2, 4, 2, 0);
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let m = train(&[], &[], &spec, &cfg).unwrap();
        let init =
            TrainedModel::initialize_with_seed(spec, rng::derive_key(cfg.seed, &[0])).unwrap();
        assert_eq!(m.params().values, init.params().values);
    }

    #[test]
    fn deterministic() {
        let (xs, ys) = random_data(3, 3, 50, 4);
        let spec = ModelSpec::mlp(3, 6, 3, 0);
        let cfg = TrainConfig {
            epochs: 5,
            batch_size: 8,
            ..TrainConfig::default()
        };
        let a = train(&xs, &ys, &spec, &cfg).unwrap();
        let b = train(&xs, &ys, &spec, &cfg).unwrap();
        let bits = |m: &TrainedModel| {
            m.params()
                .values
                .iter()
                .map(|v| v.to_bits())
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn rejects_bad_data() {
        let spec = ModelSpec::logistic(2, 2, 0);
        let cfg = TrainConfig::default();
        assert!(matches!(
            train(&[vec![0.0, 1.0]], &[2], &spec, &cfg),
            Err(Error::LabelOutOfRange { label: 2, .. })
        ));
        assert!(matches!(
            train(&[vec![0.0]], &[0], &spec, &cfg),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(train(&[], &[], &spec, &cfg), Err(Error::Empty(_))));
    }

    #[test]
    fn divergence_reported_with_epoch() {
        let spec = ModelSpec::logistic(1, 2, 0);
        let xs = vec![vec![1e200], vec![-1e200]];
        let ys = vec![0, 1];
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 2,
            optimizer: Optimizer::Sgd,
            learning_rate: 1e200,
            seed: 0,
        };
        assert!(matches!(
            train(&xs, &ys, &spec, &cfg),
            Err(Error::Diverged { .. })
        ));
    }
}
