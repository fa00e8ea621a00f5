//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the lines always reach the terminal.
//! Reference values come from closed forms written here, not from the crate.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use ldm::acquisition::{compute_weights, ldm_seeded_select, Strategy};
use ldm::estimator::{estimate_ldm_pool_with_mc, EstimatorConfig};
use ldm::harness::verify::{rank_stability, RankStabilityParams};
use ldm::harness::{al_experiment, ExperimentConfig, ExperimentRecord};
use ldm::model::{ModelSpec, TrainedModel};
use ldm::rng;
use ldm::stats::{paired_t_score, penalty_matrix, performance_profile, spearman, ResultTable};
use ldm::testbed::{
    flip_probability, log_grid, mean_rho_vs_sigma, sample_disk, sample_disk_stratified,
};

type Criterion = (&'static str, Duration, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

/// Exact LDM of `x` under the sign classifier with normal `v`: the angle
/// left between `x` and the boundary, as a fraction of π.
fn oracle_ldm(v: [f64; 2], x: [f64; 2]) -> f64 {
    let angle = (v[0] * x[1] - v[1] * x[0])
        .abs()
        .atan2(v[0] * x[0] + v[1] * x[1]);
    (PI / 2.0 - angle).abs() / PI
}

fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    1.0 - dot / (na * nb)
}

fn chi_square_p(counts: &[usize], probs: &[f64]) -> (f64, f64) {
    let n: usize = counts.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0;
    for (&c, &p) in counts.iter().zip(probs) {
        if p == 0.0 {
            assert_eq!(c, 0, "zero-probability cell was drawn");
            continue;
        }
        let e = n as f64 * p;
        stat += (c as f64 - e).powi(2) / e;
        cells += 1;
    }
    let dist = ChiSquared::new((cells - 1) as f64).unwrap();
    (stat, 1.0 - dist.cdf(stat))
}

fn consistency() -> Outcome {
    let v = [0.006, 0.008];
    let g = TrainedModel::new(ModelSpec::linear_2d(0), v.to_vec()).unwrap();
    let mc = sample_disk_stratified(10_000, &mut rng::stream(100))
        .unwrap()
        .to_vectors();
    let mut points = sample_disk(50, &mut rng::stream(101)).unwrap().points;
    // on the positive side, 0.01·π away from the boundary
    let t = v[1].atan2(v[0]) + PI / 2.0 - 0.01 * PI;
    let target = [0.5 * t.cos(), 0.5 * t.sin()];
    assert!((oracle_ldm(v, target) - 0.01).abs() < 1e-12);
    points.push(target);
    let pool: Vec<Vec<f64>> = points.iter().map(|x| x.to_vec()).collect();
    let cfg = EstimatorConfig {
        stop_condition: 20,
        mc_size: 10_000,
        seed: 102,
        ..EstimatorConfig::default()
    };
    let est = estimate_ldm_pool_with_mc(&pool, &mc, &g, &cfg).unwrap();
    let errors: Vec<f64> = points
        .iter()
        .zip(&est)
        .map(|(x, e)| (e.value - oracle_ldm(v, *x)).abs())
        .collect();
    let mean = errors[..50].iter().sum::<f64>() / 50.0;
    let max = errors[..50].iter().copied().fold(0.0, f64::max);
    let target_err = errors[50];
    outcome(
        mean <= 0.01 && max <= 0.03 && target_err <= 1e-3,
        format!("mean |err| {mean:.4} (<= 0.01), max {max:.4} (<= 0.03), LDM=0.01 point {target_err:.5} (<= 1e-3)"),
    )
}

fn flip_ordering() -> Outcome {
    let v = [0.6, 0.8];
    let points = sample_disk(200, &mut rng::stream(200)).unwrap().points;
    let ldm: Vec<f64> = points.iter().map(|&x| oracle_ldm(v, x)).collect();
    let flips: Vec<f64> = points
        .iter()
        .map(|&x| flip_probability(v, x, 0.3, 20_000, &mut rng::stream(201)).unwrap())
        .collect();
    let rho = spearman(&ldm, &flips).unwrap();
    outcome(rho <= -0.95, format!("spearman {rho:.4} (<= -0.95)"))
}

fn rho_monotone() -> Outcome {
    let grid = log_grid(1e-3, 1e2, 20);
    let curve = mean_rho_vs_sigma([0.6, 0.8], &grid, 5_000, &mut rng::stream(300)).unwrap();
    let means: Vec<f64> = curve.iter().map(|c| c.y).collect();
    let strictly = means.windows(2).all(|w| w[0] < w[1]);
    let rho = spearman(&grid, &means).unwrap();
    // tiny σ barely rotates v; huge σ gives a uniform angle with mean π/2
    let ends = means[0] < 1e-3 && (means[19] - 0.5).abs() < 0.02;
    outcome(
        strictly && rho == 1.0 && ends,
        format!(
            "strictly increasing {strictly}, spearman {rho:.4}, mean rho {:.5} -> {:.4}",
            means[0], means[19]
        ),
    )
}

fn rank_stability_check() -> Outcome {
    let r = rank_stability(&RankStabilityParams::default()).unwrap();
    let rho = r.get("spearman").unwrap();
    outcome(
        rho >= 0.95,
        format!("spearman(s=10, s=200) {rho:.4} (>= 0.95)"),
    )
}

fn seeding() -> Outcome {
    // partition masses on random pools
    let mut stream = rng::stream(500);
    let mut worst_mass = 0.0f64;
    for _ in 0..200 {
        let n = stream.random_range(2..60);
        let q = stream.random_range(1..n);
        let ldm: Vec<f64> = (0..n).map(|_| stream.random_range(1e-4..1.0)).collect();
        let w = compute_weights(&ldm, q).unwrap();
        let inside = w.in_q_partition();
        let mass_q: f64 = (0..n).filter(|&i| inside[i]).map(|i| w.gamma[i]).sum();
        let mass_c: f64 = (0..n).filter(|&i| !inside[i]).map(|i| w.gamma[i]).sum();
        worst_mass = worst_mass
            .max((mass_q - 1.0).abs())
            .max((mass_c - 1.0).abs());
    }

    // hand-evaluated weights: L_q = 0.2, η = 1 and 2 outside P_q
    let w = compute_weights(&[0.1, 0.2, 0.4, 0.6], 2).unwrap();
    let (a, b) = ((-1.0f64).exp(), (-2.0f64).exp());
    let expected = [0.5, 0.5, a / (a + b), b / (a + b)];
    let fixture_err = w
        .gamma
        .iter()
        .zip(expected)
        .map(|(g, e)| (g - e).abs())
        .fold(0.0, f64::max);

    // second pick of the seeded selection against its exact distribution
    let features = vec![
        vec![1.0, 0.0],
        vec![0.8, 0.6],
        vec![0.0, 1.0],
        vec![-0.6, 0.8],
        vec![-1.0, -0.2],
    ];
    let ldm = [0.05, 0.1, 0.2, 0.3, 0.5];
    let (c, d) = ((-0.5f64).exp(), (-1.5f64).exp());
    let gamma = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, c / (c + d), d / (c + d)];
    let p: Vec<f64> = (0..5)
        .map(|i| gamma[i] * cosine_distance(&features[i], &features[0]))
        .collect();
    let total: f64 = p.iter().skip(1).map(|x| x * x).sum();
    let exact: Vec<f64> = (0..5)
        .map(|i| if i == 0 { 0.0 } else { p[i] * p[i] / total })
        .collect();
    let mut counts = [0usize; 5];
    let mut first_ok = true;
    let mut stream = rng::stream(501);
    for _ in 0..100_000 {
        let batch = ldm_seeded_select(&features, &ldm, 3, &mut stream).unwrap();
        first_ok &= batch.indices[0] == 0;
        counts[batch.indices[1]] += 1;
    }
    let (stat, p_value) = chi_square_p(&counts, &exact);
    outcome(
        worst_mass <= 1e-12 && fixture_err <= 1e-9 && first_ok && p_value > 0.01,
        format!(
            "mass error {worst_mass:.1e}, fixture error {fixture_err:.1e}, chi2 {stat:.3} p {p_value:.3} (> 0.01)"
        ),
    )
}

fn table(rows: &[(&str, &str, usize, usize, f64)]) -> ResultTable {
    let mut t = ResultTable::new();
    for &(d, a, r, s, acc) in rows {
        t.insert(d, a, r, s, acc).unwrap();
    }
    t
}

fn statistics() -> Outcome {
    let mut failures = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_string());
        }
    };

    let a = [1.0, 2.0, 3.0, 4.0, 5.0];
    check("spearman identity", spearman(&a, &a).unwrap() == 1.0);
    check(
        "spearman reversed",
        spearman(&a, &[5.0, 4.0, 3.0, 2.0, 1.0]).unwrap() == -1.0,
    );
    check(
        "spearman 0.8",
        (spearman(&a, &[1.0, 3.0, 2.0, 5.0, 4.0]).unwrap() - 0.8).abs() < 1e-12,
    );

    let zeros = [0.0; 5];
    check("t identical", paired_t_score(&a, &a).unwrap() == 0.0);
    check(
        "t constant",
        paired_t_score(&[1.0; 5], &zeros).unwrap() == f64::INFINITY,
    );
    let expected = 5f64.sqrt() * 3.0 / 2.5f64.sqrt();
    check(
        "t 4.2426",
        (paired_t_score(&a, &zeros).unwrap() - expected).abs() < 1e-12,
    );

    // A beats B at every step of one dataset
    let mut rows = Vec::new();
    for r in 0..5 {
        for s in 0..4 {
            let base = 0.5 + 0.02 * r as f64 + 0.01 * s as f64;
            rows.push(("d", "A", r, s, base + 0.1 + 0.001 * r as f64));
            rows.push(("d", "B", r, s, base));
        }
    }
    let m = penalty_matrix(&table(&rows), 2.776).unwrap();
    check(
        "penalty single",
        m.entries == vec![vec![0.0, 1.0], vec![0.0, 0.0]],
    );
    check("penalty column means", m.column_means == vec![0.0, 0.5]);

    // two datasets, A wins at half of the steps of each
    let mut rows = Vec::new();
    for d in ["d1", "d2"] {
        for r in 0..5 {
            for s in 0..4 {
                let base = 0.5 + 0.02 * r as f64;
                let gap = if s < 2 { 0.1 + 0.001 * r as f64 } else { 0.0 };
                rows.push((d, "A", r, s, base + gap));
                rows.push((d, "B", r, s, base));
            }
        }
    }
    let m = penalty_matrix(&table(&rows), 2.776).unwrap();
    check(
        "penalty two datasets",
        (m.entries[0][1] - 1.0).abs() < 1e-12 && m.entries[1][0] == 0.0,
    );

    let t = table(&[("d", "good", 0, 0, 0.9), ("d", "worse", 0, 0, 0.8)]);
    let p = performance_profile(&t, &[0.0, 0.1]).unwrap();
    check("profile fixture", p.curve("worse").unwrap() == [0.0, 1.0]);
    check("profile best", p.curve("good").unwrap() == [1.0, 1.0]);

    // random complete tables
    let mut stream = rng::stream(600);
    let deltas: Vec<f64> = (0..=50).map(|i| i as f64 / 50.0).collect();
    let mut random_ok = true;
    for _ in 0..100 {
        let n_alg = stream.random_range(1..6);
        let n_data = stream.random_range(1..4);
        let reps = stream.random_range(1..6);
        let steps = stream.random_range(1..6);
        let mut t = ResultTable::new();
        for d in 0..n_data {
            for a in 0..n_alg {
                for r in 0..reps {
                    for s in 0..steps {
                        let acc = stream.random_range(0.0..=1.0);
                        t.insert(&format!("d{d}"), &format!("a{a}"), r, s, acc)
                            .unwrap();
                    }
                }
            }
        }
        let p = performance_profile(&t, &deltas).unwrap();
        for (_, curve) in &p.curves {
            random_ok &= curve.windows(2).all(|w| w[0] <= w[1]);
            random_ok &= (curve[50] - 1.0).abs() < 1e-12;
        }
    }
    check("random profiles", random_ok);

    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            "all fixtures exact, 100 random profiles monotone with R(1) = 1".to_string()
        } else {
            format!("failed: {}", failures.join(", "))
        },
    )
}

/// Mean accuracy by labeled count for one strategy.
fn mean_curve(cfg: &ExperimentConfig, strategy: Strategy) -> BTreeMap<usize, f64> {
    let cfg = ExperimentConfig {
        strategy,
        ..cfg.clone()
    };
    let records: Vec<ExperimentRecord> = al_experiment(&cfg).unwrap();
    let mut sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for r in &records {
        let acc = r.test_accuracy.expect("no failed steps");
        let e = sums.entry(r.labeled_count).or_default();
        e.0 += acc;
        e.1 += 1;
    }
    sums.into_iter()
        .map(|(k, (s, n))| (k, s / n as f64))
        .collect()
}

const DISK_CONFIG: &str = "
dataset.kind = disk2d
dataset.size = 2000
dataset.train_fraction = 0.5
model.kind = linear2d
train.epochs = 100
train.learning_rate = 0.1
experiment.initial_per_class = 3
experiment.pool_size = 500
experiment.query_size = 1
experiment.steps = 24
experiment.repetitions = 100
";

const BLOBS_CONFIG: &str = "
dataset.kind = blobs
dataset.size = 3000
dataset.classes = 3
dataset.dim = 2
dataset.std = 1.0
dataset.gap = 2.5
dataset.train_fraction = 0.5
model.kind = mlp
model.hidden_dim = 32
train.epochs = 100
train.learning_rate = 0.01
experiment.initial_labeled = 20
experiment.pool_size = 500
experiment.query_size = 20
experiment.steps = 10
experiment.repetitions = 5
";

fn active_learning_disk() -> Outcome {
    let cfg = ExperimentConfig::parse_text(DISK_CONFIG, None).unwrap();
    let ldm = mean_curve(&cfg, Strategy::LdmS);
    let random = mean_curve(&cfg, Strategy::Random);
    let entropy = mean_curve(&cfg, Strategy::Entropy);
    let mut min_vs_random = f64::INFINITY;
    let mut max_vs_entropy = 0.0f64;
    for budget in 10..=30 {
        min_vs_random = min_vs_random.min(ldm[&budget] - random[&budget]);
        max_vs_entropy = max_vs_entropy.max((ldm[&budget] - entropy[&budget]).abs());
    }
    outcome(
        min_vs_random >= 0.01 && max_vs_entropy <= 0.02,
        format!(
            "budgets 10-30: min(LDM - Random) {:+.2} pp (>= 1), max |LDM - Entropy| {:.2} pp (<= 2)",
            100.0 * min_vs_random,
            100.0 * max_vs_entropy
        ),
    )
}

fn active_learning_blobs() -> Outcome {
    let cfg = ExperimentConfig::parse_text(BLOBS_CONFIG, None).unwrap();
    let avg = |c: BTreeMap<usize, f64>| c.values().sum::<f64>() / c.len() as f64;
    let ldm = avg(mean_curve(&cfg, Strategy::LdmS));
    let random = avg(mean_curve(&cfg, Strategy::Random));
    outcome(
        ldm >= random,
        format!("mean accuracy over steps: LDM-S {ldm:.4}, Random {random:.4}"),
    )
}

fn run_cli(config: &Path, out: &Path) {
    let status = Command::new(env!("CARGO_BIN_EXE_ldm"))
        .arg("run")
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "error")
        .status()
        .unwrap();
    assert!(status.success(), "ldm run failed");
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.cfg");
    std::fs::write(
        &config,
        "dataset.kind = blobs\ndataset.size = 800\nmodel.kind = mlp\nmodel.hidden_dim = 16\n\
         train.epochs = 20\nexperiment.strategy = ldm-s\nexperiment.initial_labeled = 10\n\
         experiment.pool_size = 200\nexperiment.query_size = 5\nexperiment.steps = 3\n\
         experiment.repetitions = 4\nexperiment.master_seed = 42\n",
    )
    .unwrap();
    let first = dir.path().join("a.jsonl");
    let second = dir.path().join("b.jsonl");
    run_cli(&config, &first);
    run_cli(&config, &second);
    let a = std::fs::read(&first).unwrap();
    let b = std::fs::read(&second).unwrap();
    let lines = a.iter().filter(|&&c| c == b'\n').count();
    outcome(
        !a.is_empty() && a == b,
        format!(
            "two runs, {lines} records, {} bytes, identical: {}",
            a.len(),
            a == b
        ),
    )
}

fn main() -> ExitCode {
    let criteria: Vec<Criterion> = vec![
        (
            "1 estimator consistency",
            Duration::from_secs(120),
            consistency,
        ),
        (
            "2 flip-probability ordering",
            Duration::from_secs(60),
            flip_ordering,
        ),
        (
            "3 rho-sigma monotonicity",
            Duration::from_secs(30),
            rho_monotone,
        ),
        (
            "4 rank stability across stop conditions",
            Duration::from_secs(300),
            rank_stability_check,
        ),
        ("5 seeding correctness", Duration::from_secs(60), seeding),
        ("6 statistics oracles", Duration::from_secs(60), statistics),
        (
            "7a 2D active-learning win",
            Duration::from_secs(600),
            active_learning_disk,
        ),
        (
            "7b Blobs LDM-S vs Random",
            Duration::from_secs(900),
            active_learning_blobs,
        ),
        ("8 determinism", Duration::from_secs(120), determinism),
    ];
    let mut all = true;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let o = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let passed = o.passed && in_time;
        all &= passed;
        println!(
            "criterion {name}: {} | {} | {:.1}s (limit {}s)",
            if passed { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
