//! Property suites checking the estimator and samplers against the exact
//! answers of the 2D testbed and of the seeding distribution.

use std::fmt;
use std::str::FromStr;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::dataset::{generate_blobs, BlobsParams};
use crate::acquisition::{compute_weights, ldm_seeded_select, seeding_distribution};
use crate::error::{Error, Result};
use crate::estimator::{estimate_ldm_pool, estimate_ldm_pool_with_mc, EstimatorConfig};
use crate::model::{train, ModelSpec, TrainConfig, TrainedModel};
use crate::rng;
use crate::stats::spearman;
use crate::testbed::{
    flip_probability, log_grid, mean_rho_vs_sigma, point_with_ldm, sample_disk,
    sample_disk_stratified, true_ldm,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Consistency,
    FlipOrdering,
    RhoMonotone,
    RankStability,
    SeedingDist,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Consistency,
        Suite::FlipOrdering,
        Suite::RhoMonotone,
        Suite::RankStability,
        Suite::SeedingDist,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Consistency => "consistency",
            Suite::FlipOrdering => "flip-ordering",
            Suite::RhoMonotone => "rho-monotone",
            Suite::RankStability => "rank-stability",
            Suite::SeedingDist => "seeding-dist",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        Suite::ALL
            .into_iter()
            .find(|suite| suite.as_str() == norm || suite.as_str().replace('-', "") == norm)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown suite `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: bool,
    /// Named measured statistics, in a fixed order.
    pub measurements: Vec<(String, f64)>,
}

impl SuiteReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.measurements
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| *v)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {}",
            self.suite,
            if self.passed { "PASS" } else { "FAIL" }
        )?;
        for (k, v) in &self.measurements {
            write!(f, " {k}={v:.6}")?;
        }
        Ok(())
    }
}

/// Fixed `g = h_v` on the disk, random pool points, exact LDM as oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyParams {
    pub points: usize,
    pub stop_condition: usize,
    pub mc_size: usize,
    /// `‖v‖`; the LDM only depends on the direction, but the perturbation
    /// scales of the ladder are absolute.
    pub v_norm: f64,
    pub seed: u64,
    pub max_mean_error: f64,
    pub max_error: f64,
    /// Tolerance for the extra point whose exact LDM is 0.01.
    pub target_error: f64,
}

impl Default for ConsistencyParams {
    fn default() -> Self {
        Self {
            points: 50,
            stop_condition: 20,
            mc_size: 10_000,
            v_norm: 0.01,
            seed: 0,
            max_mean_error: 0.01,
            max_error: 0.03,
            target_error: 1e-3,
        }
    }
}

impl ConsistencyParams {
    /// Deliberately under-resourced estimator that should fail.
    pub fn negative_control() -> Self {
        Self {
            stop_condition: 1,
            mc_size: 10,
            ..Self::default()
        }
    }
}

pub fn consistency(p: &ConsistencyParams) -> Result<SuiteReport> {
    let v = [0.6 * p.v_norm, 0.8 * p.v_norm];
    let g = TrainedModel::new(ModelSpec::linear_2d(0), v.to_vec())?;
    let mc = sample_disk_stratified(p.mc_size, &mut rng::substream(p.seed, &[0]))?.to_vectors();
    let mut points = sample_disk(p.points, &mut rng::substream(p.seed, &[1]))?.points;
    points.push(point_with_ldm(v, 0.01, 0.5)?);
    let pool: Vec<Vec<f64>> = points.iter().map(|x| x.to_vec()).collect();
    let cfg = EstimatorConfig {
        stop_condition: p.stop_condition,
        mc_size: p.mc_size,
        seed: rng::derive_key(p.seed, &[2]),
        ..EstimatorConfig::default()
    };
    let est = estimate_ldm_pool_with_mc(&pool, &mc, &g, &cfg)?;
    let errors: Vec<f64> = points
        .iter()
        .zip(&est)
        .map(|(x, e)| Ok((e.value - true_ldm(v, *x)?).abs()))
        .collect::<Result<_>>()?;
    let random = &errors[..p.points];
    let mean = random.iter().sum::<f64>() / p.points as f64;
    let max = random.iter().copied().fold(0.0, f64::max);
    let target = errors[p.points];
    Ok(SuiteReport {
        suite: Suite::Consistency,
        passed: mean <= p.max_mean_error && max <= p.max_error && target <= p.target_error,
        measurements: vec![
            ("mean_abs_error".into(), mean),
            ("max_abs_error".into(), max),
            ("target_point_error".into(), target),
        ],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlipOrderingParams {
    pub points: usize,
    /// σ as a multiple of `‖v‖`.
    pub relative_sigma: f64,
    pub draws: usize,
    pub seed: u64,
    pub max_spearman: f64,
}

impl Default for FlipOrderingParams {
    fn default() -> Self {
        Self {
            points: 200,
            relative_sigma: 0.3,
            draws: 20_000,
            seed: 0,
            max_spearman: -0.95,
        }
    }
}

/// Every point is scored against the same hypothesis draws.
pub fn flip_ordering(p: &FlipOrderingParams) -> Result<SuiteReport> {
    let v = [0.6, 0.8];
    let points = sample_disk(p.points, &mut rng::substream(p.seed, &[0]))?.points;
    let draw_seed = rng::derive_key(p.seed, &[1]);
    let mut ldm = Vec::with_capacity(points.len());
    let mut flips = Vec::with_capacity(points.len());
    for x in &points {
        ldm.push(true_ldm(v, *x)?);
        flips.push(flip_probability(
            v,
            *x,
            p.relative_sigma,
            p.draws,
            &mut rng::stream(draw_seed),
        )?);
    }
    let rho = spearman(&ldm, &flips)?;
    Ok(SuiteReport {
        suite: Suite::FlipOrdering,
        passed: rho <= p.max_spearman,
        measurements: vec![("spearman".into(), rho)],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RhoMonotoneParams {
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    pub grid_points: usize,
    pub draws: usize,
    pub seed: u64,
}

impl Default for RhoMonotoneParams {
    fn default() -> Self {
        Self {
            sigma_lo: 1e-3,
            sigma_hi: 1e2,
            grid_points: 20,
            draws: 5_000,
            seed: 0,
        }
    }
}

pub fn rho_monotone(p: &RhoMonotoneParams) -> Result<SuiteReport> {
    let grid = log_grid(p.sigma_lo, p.sigma_hi, p.grid_points);
    let curve = mean_rho_vs_sigma([0.6, 0.8], &grid, p.draws, &mut rng::stream(p.seed))?;
    let means: Vec<f64> = curve.iter().map(|c| c.y).collect();
    let strictly = means.windows(2).all(|w| w[0] < w[1]);
    let rho = spearman(&grid, &means)?;
    Ok(SuiteReport {
        suite: Suite::RhoMonotone,
        passed: strictly && rho == 1.0,
        measurements: vec![
            ("spearman".into(), rho),
            ("strictly_increasing".into(), f64::from(u8::from(strictly))),
            ("rho_at_min_sigma".into(), means[0]),
            ("rho_at_max_sigma".into(), means[means.len() - 1]),
        ],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankStabilityParams {
    pub pool_size: usize,
    pub labeled: usize,
    pub low_stop: usize,
    pub high_stop: usize,
    pub seed: u64,
    pub min_spearman: f64,
}

impl Default for RankStabilityParams {
    fn default() -> Self {
        Self {
            pool_size: 500,
            labeled: 100,
            low_stop: 10,
            high_stop: 200,
            seed: 0,
            min_spearman: 0.95,
        }
    }
}

/// Two overlapping 2D Gaussian classes used by the rank-stability suite.
pub fn rank_stability_blobs() -> BlobsParams {
    BlobsParams {
        n: 0,
        classes: 2,
        dim: 2,
        std: 1.0,
        gap: 2.0,
        centers: None,
    }
}

/// Logistic model on blobs; the pool's estimates at two stop conditions.
pub fn rank_stability(p: &RankStabilityParams) -> Result<SuiteReport> {
    let data = generate_blobs(
        &BlobsParams {
            n: p.pool_size + p.labeled,
            ..rank_stability_blobs()
        },
        rng::derive_key(p.seed, &[0]),
    )?;
    let (train_x, pool) = data.features.split_at(p.labeled);
    let spec = ModelSpec::logistic(data.dim(), data.num_classes, 0);
    let model = train(
        train_x,
        &data.labels[..p.labeled],
        &spec,
        &TrainConfig {
            epochs: 100,
            seed: rng::derive_key(p.seed, &[1]),
            ..TrainConfig::default()
        },
    )?;
    let est = |s: usize| -> Result<Vec<f64>> {
        let cfg = EstimatorConfig {
            stop_condition: s,
            mc_size: pool.len(),
            seed: rng::derive_key(p.seed, &[2, s as u64]),
            ..EstimatorConfig::default()
        };
        Ok(estimate_ldm_pool(pool, &model, &cfg)?
            .iter()
            .map(|e| e.value)
            .collect())
    };
    let low = est(p.low_stop)?;
    let high = est(p.high_stop)?;
    let rho = spearman(&low, &high)?;
    Ok(SuiteReport {
        suite: Suite::RankStability,
        passed: rho >= p.min_spearman,
        measurements: vec![("spearman".into(), rho)],
    })
}

/// Five pool points with fixed features and LDMs.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedingFixture {
    pub features: Vec<Vec<f64>>,
    pub ldm: Vec<f64>,
    pub q: usize,
}

impl Default for SeedingFixture {
    fn default() -> Self {
        Self {
            features: vec![
                vec![1.0, 0.0],
                vec![0.8, 0.6],
                vec![0.0, 1.0],
                vec![-0.6, 0.8],
                vec![-1.0, -0.2],
            ],
            ldm: vec![0.05, 0.1, 0.2, 0.3, 0.5],
            q: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedingParams {
    pub fixture: SeedingFixture,
    pub trials: usize,
    pub seed: u64,
    pub min_p_value: f64,
}

impl Default for SeedingParams {
    fn default() -> Self {
        Self {
            fixture: SeedingFixture::default(),
            trials: 100_000,
            seed: 0,
            min_p_value: 0.01,
        }
    }
}

/// Pearson χ² statistic and p-value of `counts` against `probs`; cells
/// with zero probability must be empty and do not count as categories.
pub fn chi_square(counts: &[usize], probs: &[f64]) -> Result<(f64, f64)> {
    let n: usize = counts.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&c, &p) in counts.iter().zip(probs) {
        if p == 0.0 {
            if c > 0 {
                return Ok((f64::INFINITY, 0.0));
            }
            continue;
        }
        let e = n as f64 * p;
        stat += (c as f64 - e) * (c as f64 - e) / e;
        cells += 1;
    }
    if cells < 2 {
        return Err(Error::InvalidArgument(
            "chi-square needs two categories".into(),
        ));
    }
    let dist =
        ChiSquared::new((cells - 1) as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok((stat, 1.0 - dist.cdf(stat)))
}

/// Second-pick frequencies of the seeded selection against its exact
/// distribution.
pub fn seeding_dist(p: &SeedingParams) -> Result<SuiteReport> {
    let f = &p.fixture;
    let weights = compute_weights(&f.ldm, f.q)?;
    let first = weights.q_partition[0];
    let exact = seeding_distribution(&f.features, &weights.gamma, &[first])?;
    let mut counts = vec![0usize; f.features.len()];
    let mut stream = rng::stream(p.seed);
    let mut first_ok = true;
    for _ in 0..p.trials {
        let batch = ldm_seeded_select(&f.features, &f.ldm, f.q, &mut stream)?;
        first_ok &= batch.indices[0] == first;
        counts[batch.indices[1]] += 1;
    }
    let (stat, p_value) = chi_square(&counts, &exact)?;
    Ok(SuiteReport {
        suite: Suite::SeedingDist,
        passed: first_ok && p_value > p.min_p_value,
        measurements: vec![("chi_square".into(), stat), ("p_value".into(), p_value)],
    })
}

/// Run a suite at its default scale.
pub fn run_suite(suite: Suite, seed: u64) -> Result<SuiteReport> {
    match suite {
        Suite::Consistency => consistency(&ConsistencyParams {
            seed,
            ..Default::default()
        }),
        Suite::FlipOrdering => flip_ordering(&FlipOrderingParams {
            seed,
            ..Default::default()
        }),
        Suite::RhoMonotone => rho_monotone(&RhoMonotoneParams {
            seed,
            ..Default::default()
        }),
        Suite::RankStability => rank_stability(&RankStabilityParams {
            seed,
            ..Default::default()
        }),
        Suite::SeedingDist => seeding_dist(&SeedingParams {
            seed,
            ..Default::default()
        }),
    }
}
