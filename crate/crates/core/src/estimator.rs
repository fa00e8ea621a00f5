//! Monte-Carlo disagreement and the empirical least-disagree-metric.
//!
//! Hypotheses are drawn around a trained model `g` by adding Gaussian noise of
//! increasing scale to its final layer. For a target `x`, the estimate is the
//! smallest Monte-Carlo disagreement `ρ_M(h, g)` among drawn `h` that flip the
//! prediction at `x`. Each noise level is sampled until `s` consecutive draws
//! fail to lower the running estimate.
//!
//! Draw `j` of level `k` always comes from the stream `(seed, k, j)`, so the
//! per-point and shared-draw pool estimators see the same hypotheses and a
//! point's trajectory does not depend on which other points share the pool.

use std::io::Write;

use rand::seq::index;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{PerturbScope, TrainedModel};
use crate::rng;

/// Monte-Carlo sets at least this large are scored in parallel.
const PAR_THRESHOLD: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    /// Strictly ascending perturbation scales.
    pub sigma_ladder: Vec<f64>,
    /// Consecutive non-improving draws before moving to the next scale.
    pub stop_condition: usize,
    /// Monte-Carlo set size. Pool estimation uses `min(mc_size, pool size)`
    /// points of the pool itself.
    pub mc_size: usize,
    pub seed: u64,
    /// Also perturb the final-layer bias.
    pub perturb_bias: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            sigma_ladder: default_sigma_ladder(),
            stop_condition: 10,
            mc_size: 10_000,
            seed: 0,
            perturb_bias: true,
        }
    }
}

/// `σ_k = 10^(0.1 k − 5)` for `k = 1..=51`.
pub fn default_sigma_ladder() -> Vec<f64> {
    sigma_ladder(0.1, 51)
}

/// `σ_k = 10^(β k − 5)` for `k = 1..=count`.
pub fn sigma_ladder(beta: f64, count: usize) -> Vec<f64> {
    (1..=count)
        .map(|k| 10f64.powf(beta * k as f64 - 5.0))
        .collect()
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sigma_ladder.is_empty() {
            return Err(Error::InvalidConfig("sigma ladder is empty".into()));
        }
        if self
            .sigma_ladder
            .iter()
            .any(|s| !(*s > 0.0 && s.is_finite()))
        {
            return Err(Error::InvalidConfig("sigmas must be positive".into()));
        }
        if self.sigma_ladder.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "sigma ladder must be strictly ascending".into(),
            ));
        }
        if self.stop_condition == 0 {
            return Err(Error::InvalidConfig(
                "stop condition must be positive".into(),
            ));
        }
        if self.mc_size == 0 {
            return Err(Error::InvalidConfig("mc_size must be positive".into()));
        }
        Ok(())
    }

    fn scope(&self) -> PerturbScope {
        PerturbScope {
            include_bias: self.perturb_bias,
        }
    }
}

/// Estimated LDM of one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdmEstimate {
    /// Smallest `ρ_M` over drawn hypotheses disagreeing at the point, or 1
    /// when none disagreed. Lies in `(0, 1]` whenever the point belongs to
    /// the Monte-Carlo set; with a separate set it can reach 0.
    pub value: f64,
    pub hypotheses_drawn: usize,
    pub disagreements_found: usize,
}

/// `ρ_M(h, g)`: fraction of `mc_set` on which `h` and `g` predict differently.
pub fn disagree_fraction(h: &TrainedModel, g: &TrainedModel, mc_set: &[Vec<f64>]) -> Result<f64> {
    if h.spec() != g.spec() {
        return Err(Error::SpecMismatch);
    }
    if mc_set.is_empty() {
        return Err(Error::Empty("Monte-Carlo set"));
    }
    let mut differ = 0usize;
    for x in mc_set {
        if h.predict(x)? != g.predict(x)? {
            differ += 1;
        }
    }
    Ok(differ as f64 / mc_set.len() as f64)
}

/// Features and reference predictions of a Monte-Carlo set under `g`.
struct Reference<'a> {
    g: &'a TrainedModel,
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
}

impl<'a> Reference<'a> {
    fn new(g: &'a TrainedModel, xs: &[Vec<f64>]) -> Result<Self> {
        let features = g.features_batch(xs)?;
        Ok(Self::from_features(g, features))
    }

    fn from_features(g: &'a TrainedModel, features: Vec<Vec<f64>>) -> Self {
        let labels = features
            .iter()
            .map(|z| g.head_predict(g.head(), z))
            .collect();
        Self {
            g,
            features,
            labels,
        }
    }

    /// `ρ_M` of the hypothesis with final layer `head`.
    fn rho(&self, head: &[f64]) -> f64 {
        let g = self.g;
        let count = if self.features.len() >= PAR_THRESHOLD {
            self.features
                .par_iter()
                .zip(self.labels.par_iter())
                .filter(|(z, &y)| g.head_predict(head, z) != y)
                .count()
        } else {
            self.features
                .iter()
                .zip(&self.labels)
                .filter(|(z, &y)| g.head_predict(head, z) != y)
                .count()
        };
        count as f64 / self.features.len() as f64
    }
}

/// Running state of one point under the update rule.
#[derive(Debug, Clone, Copy)]
struct PointState {
    value: f64,
    counter: usize,
    drawn: usize,
    disagreements: usize,
}

impl PointState {
    fn new() -> Self {
        Self {
            value: 1.0,
            counter: 0,
            drawn: 0,
            disagreements: 0,
        }
    }

    /// Apply one drawn hypothesis. `rho` is evaluated only when needed.
    fn observe(&mut self, disagrees: bool, rho: &mut impl FnMut() -> f64) {
        self.drawn += 1;
        self.counter += 1;
        if disagrees {
            self.disagreements += 1;
            let r = rho();
            if self.value > r {
                self.value = r;
                self.counter = 0;
            }
        }
    }

    fn estimate(&self) -> LdmEstimate {
        LdmEstimate {
            value: self.value,
            hypotheses_drawn: self.drawn,
            disagreements_found: self.disagreements,
        }
    }
}

/// Empirical LDM of `x` under `g`, one point at a time.
///
/// `mc_set` must hold exactly `cfg.mc_size` points.
pub fn estimate_ldm(
    x: &[f64],
    g: &TrainedModel,
    mc_set: &[Vec<f64>],
    cfg: &EstimatorConfig,
) -> Result<LdmEstimate> {
    estimate_ldm_traced(x, g, mc_set, cfg, |_| {})
}

/// As [`estimate_ldm`], calling `trace` with the running estimate after
/// every drawn hypothesis.
pub fn estimate_ldm_traced(
    x: &[f64],
    g: &TrainedModel,
    mc_set: &[Vec<f64>],
    cfg: &EstimatorConfig,
    mut trace: impl FnMut(f64),
) -> Result<LdmEstimate> {
    cfg.validate()?;
    if mc_set.len() != cfg.mc_size {
        return Err(Error::InvalidConfig(format!(
            "Monte-Carlo set has {} points but mc_size is {}",
            mc_set.len(),
            cfg.mc_size
        )));
    }
    let reference = Reference::new(g, mc_set)?;
    let z = g.features(x)?;
    let label = g.head_predict(g.head(), &z);
    let scope = cfg.scope();
    let mut head = Vec::with_capacity(g.head().len());
    let mut state = PointState::new();

    for (k, &sigma) in cfg.sigma_ladder.iter().enumerate() {
        state.counter = 0;
        let mut j = 0u64;
        while state.counter < cfg.stop_condition {
            let mut stream = rng::substream(cfg.seed, &[k as u64, j]);
            j += 1;
            g.draw_head(sigma, scope, &mut stream, &mut head);
            let disagrees = g.head_predict(&head, &z) != label;
            state.observe(disagrees, &mut || reference.rho(&head));
            trace(state.value);
        }
    }
    Ok(state.estimate())
}

/// Empirical LDM of every pool point with shared hypothesis draws; the
/// Monte-Carlo set is the pool itself (subsampled without replacement to
/// `cfg.mc_size` when the pool is larger).
pub fn estimate_ldm_pool(
    pool: &[Vec<f64>],
    g: &TrainedModel,
    cfg: &EstimatorConfig,
) -> Result<Vec<LdmEstimate>> {
    cfg.validate()?;
    if pool.is_empty() {
        return Err(Error::Empty("pool"));
    }
    let features = g.features_batch(pool)?;
    let reference = if cfg.mc_size >= pool.len() {
        Reference::from_features(g, features.clone())
    } else {
        let mut stream = rng::substream(cfg.seed, &[u64::MAX]);
        let mut picks = index::sample(&mut stream, pool.len(), cfg.mc_size).into_vec();
        picks.sort_unstable();
        Reference::from_features(g, picks.iter().map(|&i| features[i].clone()).collect())
    };
    shared_draws(&features, &reference, cfg)
}

/// Shared-draw pool estimation against an explicit Monte-Carlo set.
pub fn estimate_ldm_pool_with_mc(
    pool: &[Vec<f64>],
    mc_set: &[Vec<f64>],
    g: &TrainedModel,
    cfg: &EstimatorConfig,
) -> Result<Vec<LdmEstimate>> {
    cfg.validate()?;
    if pool.is_empty() {
        return Err(Error::Empty("pool"));
    }
    if mc_set.is_empty() {
        return Err(Error::Empty("Monte-Carlo set"));
    }
    let features = g.features_batch(pool)?;
    let reference = Reference::new(g, mc_set)?;
    shared_draws(&features, &reference, cfg)
}

/// Each drawn hypothesis is scored once and offered to every point still
/// active at the current level. A point leaves the level after `s`
/// consecutive non-improving draws, exactly as in the per-point loop; the
/// level ends when every point has left.
fn shared_draws(
    features: &[Vec<f64>],
    reference: &Reference<'_>,
    cfg: &EstimatorConfig,
) -> Result<Vec<LdmEstimate>> {
    let g = reference.g;
    let labels: Vec<usize> = features
        .iter()
        .map(|z| g.head_predict(g.head(), z))
        .collect();
    let scope = cfg.scope();
    let mut states = vec![PointState::new(); features.len()];
    let mut active: Vec<usize> = Vec::with_capacity(features.len());
    let mut head = Vec::with_capacity(g.head().len());

    for (k, &sigma) in cfg.sigma_ladder.iter().enumerate() {
        active.clear();
        active.extend(0..features.len());
        for s in &mut states {
            s.counter = 0;
        }
        let mut j = 0u64;
        while !active.is_empty() {
            let mut stream = rng::substream(cfg.seed, &[k as u64, j]);
            j += 1;
            g.draw_head(sigma, scope, &mut stream, &mut head);
            let mut rho_cache: Option<f64> = None;
            let mut rho = || *rho_cache.get_or_insert_with(|| reference.rho(&head));
            for &i in &active {
                let disagrees = g.head_predict(&head, &features[i]) != labels[i];
                states[i].observe(disagrees, &mut rho);
            }
            active.retain(|&i| states[i].counter < cfg.stop_condition);
        }
    }
    Ok(states.iter().map(PointState::estimate).collect())
}

/// Per-point estimates for a pool with the pool as Monte-Carlo set; point `i`
/// uses its own seed `(cfg.seed, i)` so draws are independent across points.
pub fn estimate_ldm_pool_independent(
    pool: &[Vec<f64>],
    g: &TrainedModel,
    cfg: &EstimatorConfig,
) -> Result<Vec<LdmEstimate>> {
    if pool.is_empty() {
        return Err(Error::Empty("pool"));
    }
    let point_cfg = |i: usize| EstimatorConfig {
        seed: rng::derive_key(cfg.seed, &[i as u64]),
        mc_size: pool.len(),
        ..cfg.clone()
    };
    (0..pool.len())
        .into_par_iter()
        .map(|i| estimate_ldm(&pool[i], g, pool, &point_cfg(i)))
        .collect()
}

/// Write estimates as CSV:
/// `pool_index,ldm_value,hypotheses_drawn,disagreements_found`.
pub fn write_estimates_csv<W: Write>(estimates: &[LdmEstimate], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "pool_index",
        "ldm_value",
        "hypotheses_drawn",
        "disagreements_found",
    ])?;
    for (i, e) in estimates.iter().enumerate() {
        w.write_record([
            i.to_string(),
            e.value.to_string(),
            e.hypotheses_drawn.to_string(),
            e.disagreements_found.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;
    use crate::testbed;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn linear(v: [f64; 2]) -> TrainedModel {
        TrainedModel::new(ModelSpec::linear_2d(0), v.to_vec()).unwrap()
    }

    fn small_cfg(s: usize, m: usize) -> EstimatorConfig {
        EstimatorConfig {
            stop_condition: s,
            mc_size: m,
            seed: 3,
            ..EstimatorConfig::default()
        }
    }

    #[test]
    fn default_ladder() {
        let l = default_sigma_ladder();
        assert_eq!(l.len(), 51);
        assert!((l[0] - 10f64.powf(-4.9)).abs() < 1e-18);
        assert!((l[50] - 10f64.powf(0.1)).abs() < 1e-12);
        assert!(EstimatorConfig::default().validate().is_ok());
    }

    #[test]
    fn config_validation() {
        let mut c = EstimatorConfig {
            sigma_ladder: vec![0.1, 0.1],
            ..EstimatorConfig::default()
        };
        assert!(c.validate().is_err());
        c.sigma_ladder = vec![];
        assert!(c.validate().is_err());
        let c = EstimatorConfig {
            stop_condition: 0,
            ..EstimatorConfig::default()
        };
        assert!(c.validate().is_err());
        let c = EstimatorConfig {
            mc_size: 0,
            ..EstimatorConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn disagree_fraction_fixtures() {
        let mut r = ChaCha8Rng::seed_from_u64(0);
        let mc = testbed::sample_disk(1000, &mut r).unwrap().to_vectors();
        let g = linear([0.6, 0.8]);
        assert_eq!(disagree_fraction(&g, &g, &mc).unwrap(), 0.0);
        let h = linear([-0.6, -0.8]);
        assert_eq!(disagree_fraction(&h, &g, &mc).unwrap(), 1.0);
        assert!(disagree_fraction(&h, &g, &[]).is_err());
        let other = TrainedModel::new(ModelSpec::logistic(2, 2, 0), vec![0.0; 6]).unwrap();
        assert!(matches!(
            disagree_fraction(&other, &g, &mc),
            Err(Error::SpecMismatch)
        ));
    }

    #[test]
    fn disagree_fraction_matches_angle() {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let mc = testbed::sample_disk(100_000, &mut r).unwrap().to_vectors();
        let v = [1.0, 0.0];
        let theta: f64 = 0.7;
        let w = [theta.cos(), theta.sin()];
        let rho = disagree_fraction(&linear(w), &linear(v), &mc).unwrap();
        assert!((rho - theta / std::f64::consts::PI).abs() <= 0.01);
    }

    #[test]
    fn never_disagreeing_gives_one() {
        // far from the boundary with a tiny ladder nothing flips
        let g = linear([1.0, 0.0]);
        let mc = vec![vec![0.9, 0.0], vec![0.5, 0.1]];
        let cfg = EstimatorConfig {
            sigma_ladder: vec![1e-6, 1e-5],
            stop_condition: 5,
            mc_size: 2,
            seed: 0,
            perturb_bias: true,
        };
        let e = estimate_ldm(&[0.9, 0.0], &g, &mc, &cfg).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.disagreements_found, 0);
        assert_eq!(e.hypotheses_drawn, 10);
    }

    #[test]
    fn mc_size_must_match() {
        let g = linear([1.0, 0.0]);
        let cfg = small_cfg(5, 3);
        assert!(estimate_ldm(&[0.1, 0.2], &g, &[vec![0.0, 1.0]], &cfg).is_err());
    }

    #[test]
    fn running_estimate_never_increases() {
        let mut r = ChaCha8Rng::seed_from_u64(2);
        let mc = testbed::sample_disk(500, &mut r).unwrap().to_vectors();
        let g = linear([0.3, 0.9]);
        let mut trace = Vec::new();
        let e = estimate_ldm_traced(&[0.4, -0.1], &g, &mc, &small_cfg(10, 500), |v| {
            trace.push(v)
        })
        .unwrap();
        assert_eq!(trace.len(), e.hypotheses_drawn);
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(*trace.last().unwrap(), e.value);
        assert!(e.value > 0.0 && e.value <= 1.0);
    }

    #[test]
    fn boundary_point_estimate_is_small() {
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let mc = testbed::sample_disk(10_000, &mut r).unwrap().to_vectors();
        let v = [0.6, 0.8];
        let x = testbed::point_with_ldm(v, 0.0, 0.5).unwrap();
        let e = estimate_ldm(&x, &linear(v), &mc, &small_cfg(20, 10_000)).unwrap();
        assert!(e.value <= 0.01, "{e:?}");
    }

    #[test]
    fn single_point_pool_matches_per_point() {
        let g = TrainedModel::initialize(ModelSpec::mlp(3, 5, 3, 8)).unwrap();
        let x = vec![0.2, -0.4, 1.0];
        let cfg = small_cfg(7, 1);
        let pooled = estimate_ldm_pool(std::slice::from_ref(&x), &g, &cfg).unwrap();
        let single = estimate_ldm(&x, &g, std::slice::from_ref(&x), &cfg).unwrap();
        assert_eq!(pooled[0], single);
    }

    #[test]
    fn shared_draws_follow_per_point_trajectories() {
        // same seed: every point of the pool sees the per-point draw sequence
        let mut r = ChaCha8Rng::seed_from_u64(4);
        let pool = testbed::sample_disk(40, &mut r).unwrap().to_vectors();
        let g = linear([0.2, -1.1]);
        let cfg = small_cfg(6, 40);
        let pooled = estimate_ldm_pool(&pool, &g, &cfg).unwrap();
        for (x, p) in pool.iter().zip(&pooled) {
            assert_eq!(*p, estimate_ldm(x, &g, &pool, &cfg).unwrap());
        }
    }

    #[test]
    fn pool_values_in_range() {
        let g = TrainedModel::initialize(ModelSpec::logistic(2, 3, 1)).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(5);
        let pool = testbed::sample_disk(60, &mut r).unwrap().to_vectors();
        for e in estimate_ldm_pool(&pool, &g, &small_cfg(5, 60)).unwrap() {
            assert!(e.value > 0.0 && e.value <= 1.0);
            if e.value == 1.0 {
                // either nothing flipped or a flip disagreed everywhere
                assert!(e.disagreements_found == 0 || e.hypotheses_drawn > 0);
            }
        }
        assert!(estimate_ldm_pool(&[], &g, &small_cfg(5, 30)).is_err());
    }

    #[test]
    fn estimates_csv() {
        let mut buf = Vec::new();
        let e = LdmEstimate {
            value: 0.25,
            hypotheses_drawn: 12,
            disagreements_found: 3,
        };
        write_estimates_csv(&[e], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "pool_index,ldm_value,hypotheses_drawn,disagreements_found\n0,0.25,12,3\n"
        );
    }
}
