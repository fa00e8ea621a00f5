//! Batch selection.
//!
//! LDM-S splits the pool into the `q` smallest-LDM points `P_q` and the rest
//! `P_c`, weights each partition with an exponentially decaying score of the
//! LDM excess over the `P_q` threshold, then seeds a batch k-means++ style:
//! the smallest-LDM point first, afterwards point `x` with probability
//! proportional to `(γ_x · min_{x' ∈ Q} d_cos(z_x, z_x'))²`.
//!
//! Every selector breaks ties toward the lower pool index.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};

/// Clamp applied to `L_q` before dividing by it.
pub const LDM_THRESHOLD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    LdmS,
    Random,
    Entropy,
    Margin,
    Coreset,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::LdmS,
        Strategy::Random,
        Strategy::Entropy,
        Strategy::Margin,
        Strategy::Coreset,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::LdmS => "ldm-s",
            Strategy::Random => "random",
            Strategy::Entropy => "entropy",
            Strategy::Margin => "margin",
            Strategy::Coreset => "coreset",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "ldm-s" | "ldms" | "ldm" => Ok(Strategy::LdmS),
            "random" | "rand" => Ok(Strategy::Random),
            "entropy" => Ok(Strategy::Entropy),
            "margin" => Ok(Strategy::Margin),
            "coreset" => Ok(Strategy::Coreset),
            other => Err(Error::InvalidConfig(format!("unknown strategy `{other}`"))),
        }
    }
}

/// Selected pool indices in selection order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionBatch {
    pub indices: Vec<usize>,
    pub strategy: Strategy,
    /// Seeding steps where every candidate had zero probability and a
    /// uniform draw was used instead.
    pub fallback_draws: usize,
}

impl SelectionBatch {
    fn new(indices: Vec<usize>, strategy: Strategy) -> Self {
        Self {
            indices,
            strategy,
            fallback_draws: 0,
        }
    }
}

/// Per-point weights `γ` for LDM seeding.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightAssignment {
    pub gamma: Vec<f64>,
    /// `P_q`, ordered by ascending LDM.
    pub q_partition: Vec<usize>,
    /// `L_q`, the largest LDM inside `P_q`.
    pub threshold: f64,
}

impl WeightAssignment {
    pub fn in_q_partition(&self) -> Vec<bool> {
        let mut mask = vec![false; self.gamma.len()];
        for &i in &self.q_partition {
            mask[i] = true;
        }
        mask
    }
}

fn check_batch(pool: usize, q: usize) -> Result<()> {
    if pool == 0 {
        return Err(Error::Empty("pool"));
    }
    if q == 0 {
        return Err(Error::InvalidArgument("query size must be positive".into()));
    }
    if q > pool {
        return Err(Error::PoolTooSmall {
            requested: q,
            available: pool,
        });
    }
    Ok(())
}

fn check_ldm(values: &[f64]) -> Result<()> {
    if let Some(i) = values
        .iter()
        .position(|v| !(v.is_finite() && (0.0..=1.0).contains(v)))
    {
        return Err(Error::InvalidArgument(format!(
            "ldm value {} at index {i} outside [0, 1]",
            values[i]
        )));
    }
    Ok(())
}

/// Indices sorted by ascending value, ties by index.
fn ascending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

/// `γ_x = e^{-η_x} / Σ_{P_i} e^{-η}` with `η_x = (L_x − L_q)_+ / L_q`,
/// normalised separately over `P_q` and `P_c`.
///
/// When `q` equals the pool size `P_c` is empty and every point gets `1/q`.
pub fn compute_weights(ldm_values: &[f64], q: usize) -> Result<WeightAssignment> {
    check_batch(ldm_values.len(), q)?;
    check_ldm(ldm_values)?;
    let order = ascending(ldm_values);
    let q_partition = order[..q].to_vec();
    let threshold = q_partition
        .iter()
        .map(|&i| ldm_values[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let denom = threshold.max(LDM_THRESHOLD_FLOOR);

    let mut gamma = vec![0.0; ldm_values.len()];
    for &i in &q_partition {
        gamma[i] = 1.0 / q as f64;
    }
    let rest = &order[q..];
    if !rest.is_empty() {
        let eta: Vec<f64> = rest
            .iter()
            .map(|&i| (ldm_values[i] - threshold).max(0.0) / denom)
            .collect();
        // shift by the smallest η so the largest term is exactly 1
        let shift = eta.iter().copied().fold(f64::INFINITY, f64::min);
        let terms: Vec<f64> = eta.iter().map(|e| (-(e - shift)).exp()).collect();
        let total: f64 = terms.iter().sum();
        for (&i, t) in rest.iter().zip(&terms) {
            gamma[i] = t / total;
        }
    }
    Ok(WeightAssignment {
        gamma,
        q_partition,
        threshold,
    })
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `1 − cos(a, b)`; a zero-norm vector is at distance 1 from everything.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    cosine_distance_with_norms(a, norm(a), b, norm(b))
}

fn cosine_distance_with_norms(a: &[f64], na: f64, b: &[f64], nb: f64) -> f64 {
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let d = 1.0 - (dot / (na * nb)).clamp(-1.0, 1.0);
    // rounding noise for parallel vectors
    if d <= 4.0 * f64::EPSILON {
        0.0
    } else {
        d
    }
}

struct Seeding<'a> {
    features: &'a [Vec<f64>],
    norms: Vec<f64>,
    min_dist: Vec<f64>,
    selected: Vec<bool>,
}

impl<'a> Seeding<'a> {
    fn new(features: &'a [Vec<f64>]) -> Self {
        Self {
            norms: features.iter().map(|z| norm(z)).collect(),
            min_dist: vec![f64::INFINITY; features.len()],
            selected: vec![false; features.len()],
            features,
        }
    }

    fn add(&mut self, i: usize) {
        self.selected[i] = true;
        let (zi, ni) = (&self.features[i], self.norms[i]);
        for j in 0..self.features.len() {
            let d = cosine_distance_with_norms(&self.features[j], self.norms[j], zi, ni);
            if d < self.min_dist[j] {
                self.min_dist[j] = d;
            }
        }
    }

    /// Unnormalised `p_x²` over unselected candidates (zero for selected).
    fn scores(&self, gamma: &[f64]) -> Vec<f64> {
        (0..self.features.len())
            .map(|j| {
                if self.selected[j] {
                    0.0
                } else {
                    let p = gamma[j] * self.min_dist[j];
                    p * p
                }
            })
            .collect()
    }
}

/// Probability of each pool point being the next seeding pick given the
/// already `selected` indices.
pub fn seeding_distribution(
    features: &[Vec<f64>],
    gamma: &[f64],
    selected: &[usize],
) -> Result<Vec<f64>> {
    if features.len() != gamma.len() {
        return Err(Error::DimensionMismatch {
            expected: features.len(),
            got: gamma.len(),
        });
    }
    if selected.is_empty() {
        return Err(Error::InvalidArgument(
            "seeding needs a selected point".into(),
        ));
    }
    let mut state = Seeding::new(features);
    for &i in selected {
        state.add(i);
    }
    let mut s = state.scores(gamma);
    let total: f64 = s.iter().sum();
    if total > 0.0 {
        s.iter_mut().for_each(|v| *v /= total);
    }
    Ok(s)
}

/// LDM-S batch: smallest-LDM point first, then weighted cosine seeding.
pub fn ldm_seeded_select<R: Rng + ?Sized>(
    features: &[Vec<f64>],
    ldm_values: &[f64],
    q: usize,
    rng: &mut R,
) -> Result<SelectionBatch> {
    if features.len() != ldm_values.len() {
        return Err(Error::DimensionMismatch {
            expected: ldm_values.len(),
            got: features.len(),
        });
    }
    let weights = compute_weights(ldm_values, q)?;
    let first = weights.q_partition[0];
    if q == ldm_values.len() {
        return Ok(SelectionBatch::new(ascending(ldm_values), Strategy::LdmS));
    }

    let mut state = Seeding::new(features);
    let mut batch = SelectionBatch::new(Vec::with_capacity(q), Strategy::LdmS);
    batch.indices.push(first);
    state.add(first);
    while batch.indices.len() < q {
        let scores = state.scores(&weights.gamma);
        let total: f64 = scores.iter().sum();
        let pick = if total > 0.0 && total.is_finite() {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &s) in scores.iter().enumerate() {
                if s <= 0.0 {
                    continue;
                }
                acc += s;
                pick = Some(i);
                if target < acc {
                    break;
                }
            }
            pick.expect("positive total has a positive entry")
        } else {
            batch.fallback_draws += 1;
            log::warn!("seeding weights are all zero; drawing uniformly from the remaining pool");
            let remaining: Vec<usize> = (0..features.len())
                .filter(|&i| !state.selected[i])
                .collect();
            remaining[rng.random_range(0..remaining.len())]
        };
        batch.indices.push(pick);
        state.add(pick);
    }
    Ok(batch)
}

/// `q` distinct uniformly random pool indices.
pub fn random_select<R: Rng + ?Sized>(
    pool_size: usize,
    q: usize,
    rng: &mut R,
) -> Result<SelectionBatch> {
    check_batch(pool_size, q)?;
    Ok(SelectionBatch::new(
        index::sample(rng, pool_size, q).into_vec(),
        Strategy::Random,
    ))
}

fn check_probas(probas: &[Vec<f64>]) -> Result<()> {
    for (index, p) in probas.iter().enumerate() {
        if p.len() < 2 {
            return Err(Error::MalformedProbabilities {
                index,
                reason: "fewer than two classes".into(),
            });
        }
        if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::MalformedProbabilities {
                index,
                reason: "negative or non-finite entry".into(),
            });
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::MalformedProbabilities {
                index,
                reason: format!("sums to {sum}"),
            });
        }
    }
    Ok(())
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum::<f64>()
}

/// Gap between the two largest probabilities.
pub fn margin(p: &[f64]) -> f64 {
    let mut top = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    for &v in p {
        if v > top {
            second = top;
            top = v;
        } else if v > second {
            second = v;
        }
    }
    top - second
}

fn top_by(scores: &[f64], q: usize, ord: impl Fn(f64, f64) -> Ordering) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| ord(scores[a], scores[b]).then(a.cmp(&b)));
    order.truncate(q);
    order
}

/// Top-`q` by predictive entropy, highest first.
pub fn entropy_select(probas: &[Vec<f64>], q: usize) -> Result<SelectionBatch> {
    check_batch(probas.len(), q)?;
    check_probas(probas)?;
    let h: Vec<f64> = probas.iter().map(|p| entropy(p)).collect();
    Ok(SelectionBatch::new(
        top_by(&h, q, |a, b| b.total_cmp(&a)),
        Strategy::Entropy,
    ))
}

/// The `q` smallest top-1/top-2 probability gaps.
pub fn margin_select(probas: &[Vec<f64>], q: usize) -> Result<SelectionBatch> {
    check_batch(probas.len(), q)?;
    check_probas(probas)?;
    let m: Vec<f64> = probas.iter().map(|p| margin(p)).collect();
    Ok(SelectionBatch::new(
        top_by(&m, q, |a, b| a.total_cmp(&b)),
        Strategy::Margin,
    ))
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Greedy k-center over Euclidean feature distance.
///
/// Each pick maximises the distance to the nearest labeled or already
/// selected point. With no labeled points the first pick is index 0.
pub fn coreset_select(
    features: &[Vec<f64>],
    labeled_features: &[Vec<f64>],
    q: usize,
) -> Result<SelectionBatch> {
    check_batch(features.len(), q)?;
    let mut min_dist: Vec<f64> = features
        .iter()
        .map(|z| {
            labeled_features
                .iter()
                .map(|l| euclidean(z, l))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut selected = vec![false; features.len()];
    let mut indices = Vec::with_capacity(q);
    while indices.len() < q {
        let mut best = None;
        let mut best_d = f64::NEG_INFINITY;
        for (i, &d) in min_dist.iter().enumerate() {
            if !selected[i] && d > best_d {
                best = Some(i);
                best_d = d;
            }
        }
        let pick = best.expect("q <= pool size leaves a candidate");
        selected[pick] = true;
        indices.push(pick);
        for (i, z) in features.iter().enumerate() {
            let d = euclidean(z, &features[pick]);
            if d < min_dist[i] {
                min_dist[i] = d;
            }
        }
    }
    Ok(SelectionBatch::new(indices, Strategy::Coreset))
}

/// One row of the selected-batch log.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchLogRow {
    pub step: usize,
    pub strategy: Strategy,
    pub pool_index: usize,
    pub ldm_value: Option<f64>,
    pub weight: Option<f64>,
    pub selection_order: usize,
}

pub const BATCH_LOG_HEADER: [&str; 6] = [
    "step",
    "strategy",
    "pool_index",
    "ldm_value",
    "weight",
    "selection_order",
];

pub fn write_batch_log<W: Write>(rows: &[BatchLogRow], out: W, header: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if header {
        w.write_record(BATCH_LOG_HEADER)?;
    }
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.step.to_string(),
            r.strategy.to_string(),
            r.pool_index.to_string(),
            opt(r.ldm_value),
            opt(r.weight),
            r.selection_order.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
