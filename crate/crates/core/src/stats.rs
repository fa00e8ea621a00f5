//! Rank correlation, paired t-scores, penalty matrices and performance
//! profiles over a grid of test accuracies.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Write;

use crate::error::{Error, Result};

/// Critical value of the two-sided paired t-test at p = 0.05 with 4 degrees
/// of freedom (five repetitions).
pub const T_CRITICAL_R5: f64 = 2.776;

/// Average ranks (1-based); tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1 ..= end
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::ConstantInput);
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation: Pearson correlation of average ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::InvalidArgument(
            "spearman needs at least two observations".into(),
        ));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("NaN in spearman input".into()));
    }
    pearson(&average_ranks(a), &average_ranks(b))
}

/// Paired t-score `√R · mean(d) / sd(d)` of `d = a − b`, with the `R − 1`
/// denominator for the standard deviation.
///
/// Zero spread gives `±∞` in the direction of the mean difference, or 0 when
/// the lists are identical. Spread below a few ulps of the largest difference
/// is treated as zero.
pub fn paired_t_score(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::InvalidArgument(
            "paired t-score needs at least two repetitions".into(),
        ));
    }
    let r = a.len() as f64;
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / r;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (r - 1.0);
    let sd = var.sqrt();
    // spread at rounding level counts as none
    let scale = diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if sd <= 4.0 * f64::EPSILON * scale {
        return Ok(if mean > 0.0 {
            f64::INFINITY
        } else if mean < 0.0 {
            f64::NEG_INFINITY
        } else {
            0.0
        });
    }
    Ok(r.sqrt() * mean / sd)
}

#[derive(Debug, Clone, Default)]
struct DatasetGrid {
    cells: BTreeMap<(String, usize, usize), f64>,
    repetitions: BTreeSet<usize>,
    steps: BTreeSet<usize>,
}

/// Test accuracies keyed by dataset, algorithm, repetition and step.
#[derive(Debug, Clone, Default)]
pub struct ResultTable {
    datasets: BTreeMap<String, DatasetGrid>,
    algorithms: BTreeSet<String>,
}

impl ResultTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add one accuracy. Re-inserting an identical value is a no-op; a
    /// conflicting value for the same cell is an error.
    pub fn insert(
        &mut self,
        dataset: &str,
        algorithm: &str,
        repetition: usize,
        step: usize,
        accuracy: f64,
    ) -> Result<()> {
        if !(0.0..=1.0).contains(&accuracy) {
            return Err(Error::InvalidArgument(format!(
                "accuracy {accuracy} outside [0, 1]"
            )));
        }
        let grid = self.datasets.entry(dataset.to_string()).or_default();
        let key = (algorithm.to_string(), repetition, step);
        if let Some(&old) = grid.cells.get(&key) {
            if old != accuracy {
                return Err(Error::InvalidArgument(format!(
                    "conflicting accuracies for {dataset}/{algorithm} repetition {repetition} step {step}"
                )));
            }
        }
        grid.cells.insert(key, accuracy);
        grid.repetitions.insert(repetition);
        grid.steps.insert(step);
        self.algorithms.insert(algorithm.to_string());
        Ok(())
    }

    pub fn algorithms(&self) -> Vec<String> {
        self.algorithms.iter().cloned().collect()
    }

    pub fn datasets(&self) -> Vec<String> {
        self.datasets.keys().cloned().collect()
    }

    pub fn is_empty(&self) -> bool {
        self.datasets.is_empty()
    }

    /// Every dataset must hold every algorithm at every repetition and step
    /// seen for that dataset.
    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Empty("result table"));
        }
        let mut missing = Vec::new();
        for (name, grid) in &self.datasets {
            for alg in &self.algorithms {
                for &r in &grid.repetitions {
                    for &t in &grid.steps {
                        if !grid.cells.contains_key(&(alg.clone(), r, t)) {
                            missing.push(format!(
                                "dataset={name} algorithm={alg} repetition={r} step={t}"
                            ));
                        }
                    }
                }
            }
        }
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::IncompleteGrid { missing })
        }
    }

    fn accuracy(&self, dataset: &str, algorithm: &str, rep: usize, step: usize) -> f64 {
        self.datasets[dataset].cells[&(algorithm.to_string(), rep, step)]
    }
}

/// Pairwise significant-win tally; entry `(i, j)` counts how often algorithm
/// `i` beat algorithm `j`, each dataset contributing at most 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyMatrix {
    pub algorithms: Vec<String>,
    pub entries: Vec<Vec<f64>>,
    /// Mean of each column over all rows.
    pub column_means: Vec<f64>,
}

/// For every dataset, step and algorithm pair, a paired t-score over
/// repetitions beyond `threshold` adds `1/T_D` to the winner's row.
pub fn penalty_matrix(table: &ResultTable, threshold: f64) -> Result<PenaltyMatrix> {
    table.validate()?;
    let algorithms = table.algorithms();
    let n = algorithms.len();
    let mut entries = vec![vec![0.0; n]; n];
    for (name, grid) in &table.datasets {
        if grid.repetitions.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "dataset {name} has fewer than two repetitions"
            )));
        }
        let share = 1.0 / grid.steps.len() as f64;
        for &t in &grid.steps {
            let series: Vec<Vec<f64>> = algorithms
                .iter()
                .map(|a| {
                    grid.repetitions
                        .iter()
                        .map(|&r| table.accuracy(name, a, r, t))
                        .collect()
                })
                .collect();
            for i in 0..n {
                for j in i + 1..n {
                    let score = paired_t_score(&series[i], &series[j])?;
                    if score > threshold {
                        entries[i][j] += share;
                    } else if score < -threshold {
                        entries[j][i] += share;
                    }
                }
            }
        }
    }
    let column_means = (0..n)
        .map(|j| entries.iter().map(|row| row[j]).sum::<f64>() / n as f64)
        .collect();
    Ok(PenaltyMatrix {
        algorithms,
        entries,
        column_means,
    })
}

impl PenaltyMatrix {
    /// CSV with a header row of algorithm names and a trailing
    /// `column_mean` row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["algorithm".to_string()];
        header.extend(self.algorithms.iter().cloned());
        w.write_record(&header)?;
        for (name, row) in self.algorithms.iter().zip(&self.entries) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        let mut rec = vec!["column_mean".to_string()];
        rec.extend(self.column_means.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
        w.flush()?;
        Ok(())
    }

    /// Aligned plain-text grid with column means underneath.
    pub fn to_text(&self) -> String {
        let label_w = self
            .algorithms
            .iter()
            .map(String::len)
            .chain(["column mean".len()])
            .max()
            .unwrap_or(0);
        let cell_w = self
            .algorithms
            .iter()
            .map(String::len)
            .max()
            .unwrap_or(0)
            .max(6);
        let mut s = String::new();
        let _ = write!(s, "{:label_w$}", "");
        for a in &self.algorithms {
            let _ = write!(s, "  {a:>cell_w$}");
        }
        s.push('\n');
        for (a, row) in self.algorithms.iter().zip(&self.entries) {
            let _ = write!(s, "{a:label_w$}");
            for v in row {
                let _ = write!(s, "  {v:>cell_w$.2}");
            }
            s.push('\n');
        }
        let _ = writeln!(
            s,
            "{:-<width$}",
            "",
            width = label_w + (cell_w + 2) * self.algorithms.len()
        );
        let _ = write!(s, "{:label_w$}", "column mean");
        for v in &self.column_means {
            let _ = write!(s, "  {v:>cell_w$.2}");
        }
        s.push('\n');
        s
    }
}

/// `R_A(δ)` for each algorithm on a shared δ grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceProfile {
    pub deltas: Vec<f64>,
    /// `(algorithm, R_A(δ) for each δ)`.
    pub curves: Vec<(String, Vec<f64>)>,
}

/// Fraction of (dataset, repetition, step) cases where an algorithm is
/// within δ of the best accuracy, averaged over datasets.
pub fn performance_profile(table: &ResultTable, deltas: &[f64]) -> Result<PerformanceProfile> {
    table.validate()?;
    if deltas.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("deltas must be ascending".into()));
    }
    let algorithms = table.algorithms();
    let mut curves: Vec<(String, Vec<f64>)> = algorithms
        .iter()
        .map(|a| (a.clone(), vec![0.0; deltas.len()]))
        .collect();
    let n_datasets = table.datasets.len() as f64;
    for (name, grid) in &table.datasets {
        let cases = (grid.repetitions.len() * grid.steps.len()) as f64;
        let mut counts = vec![vec![0usize; deltas.len()]; algorithms.len()];
        for &r in &grid.repetitions {
            for &t in &grid.steps {
                let accs: Vec<f64> = algorithms
                    .iter()
                    .map(|a| table.accuracy(name, a, r, t))
                    .collect();
                let best = accs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                for (a, acc) in accs.iter().enumerate() {
                    let gap = best - acc;
                    for (k, &d) in deltas.iter().enumerate() {
                        if gap <= d {
                            counts[a][k] += 1;
                        }
                    }
                }
            }
        }
        for (curve, c) in curves.iter_mut().zip(&counts) {
            for (v, &hits) in curve.1.iter_mut().zip(c) {
                *v += hits as f64 / cases / n_datasets;
            }
        }
    }
    Ok(PerformanceProfile {
        deltas: deltas.to_vec(),
        curves,
    })
}

impl PerformanceProfile {
    /// Long-format CSV: `algorithm,delta,fraction`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["algorithm", "delta", "fraction"])?;
        for (name, values) in &self.curves {
            for (d, v) in self.deltas.iter().zip(values) {
                w.write_record([name.clone(), d.to_string(), v.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn curve(&self, algorithm: &str) -> Option<&[f64]> {
        self.curves
            .iter()
            .find(|(a, _)| a == algorithm)
            .map(|(_, v)| v.as_slice())
    }
}

/// `count` evenly spaced values on `[0, max]`.
pub fn delta_grid(max: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![0.0];
    }
    (0..count)
        .map(|i| max * i as f64 / (count - 1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn spearman_fixtures() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(spearman(&a, &a).unwrap(), 1.0);
        let rev = [5.0, 4.0, 3.0, 2.0, 1.0];
        assert_eq!(spearman(&a, &rev).unwrap(), -1.0);
        let b = [1.0, 3.0, 2.0, 5.0, 4.0];
        assert!((spearman(&a, &b).unwrap() - 0.8).abs() < 1e-15);
        assert!(matches!(spearman(&a, &[1.0; 5]), Err(Error::ConstantInput)));
        assert!(spearman(&a, &b[..4]).is_err());
        assert!(spearman(&[1.0], &[2.0]).is_err());
    }

    #[test]
    fn mean_ranks_for_ties() {
        assert_eq!(
            average_ranks(&[3.0, 1.0, 3.0, 2.0]),
            vec![3.5, 1.0, 3.5, 2.0]
        );
    }

    #[test]
    fn t_score_fixtures() {
        let x = [0.7, 0.8, 0.75, 0.9, 0.6];
        assert_eq!(paired_t_score(&x, &x).unwrap(), 0.0);
        let ones: Vec<f64> = x.iter().map(|v| v + 1.0).collect();
        assert_eq!(paired_t_score(&ones, &x).unwrap(), f64::INFINITY);
        assert_eq!(paired_t_score(&x, &ones).unwrap(), f64::NEG_INFINITY);
        let t = paired_t_score(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0.0; 5]).unwrap();
        assert!((t - 5f64.sqrt() * 3.0 / 2.5f64.sqrt()).abs() < 1e-12);
        assert!((t - 4.2426).abs() < 1e-4);
        assert!(paired_t_score(&[1.0], &[0.0]).is_err());
    }

    fn table_from(rows: &[(&str, &str, usize, usize, f64)]) -> ResultTable {
        let mut t = ResultTable::new();
        for &(d, a, r, s, acc) in rows {
            t.insert(d, a, r, s, acc).unwrap();
        }
        t
    }

    #[test]
    fn identical_algorithms_have_no_penalty() {
        let mut t = ResultTable::new();
        for a in ["a", "b", "c"] {
            for r in 0..5 {
                for s in 0..3 {
                    t.insert("d", a, r, s, 0.5 + 0.01 * (r + s) as f64).unwrap();
                }
            }
        }
        let p = penalty_matrix(&t, T_CRITICAL_R5).unwrap();
        assert!(p.entries.iter().flatten().all(|&v| v == 0.0));
        assert_eq!(p.column_means, vec![0.0; 3]);
    }

    #[test]
    fn consistent_winner_gets_full_penalty() {
        let mut t = ResultTable::new();
        let steps = 4;
        for r in 0..5 {
            for s in 0..steps {
                let base = 0.6 + 0.02 * r as f64;
                t.insert("d", "A", r, s, base + 0.1 + 0.001 * r as f64)
                    .unwrap();
                t.insert("d", "B", r, s, base).unwrap();
            }
        }
        let p = penalty_matrix(&t, T_CRITICAL_R5).unwrap();
        assert_eq!(p.algorithms, vec!["A", "B"]);
        assert_eq!(p.entries[0][1], 1.0);
        assert_eq!(p.entries[1][0], 0.0);
        assert_eq!(p.column_means, vec![0.0, 0.5]);
    }

    #[test]
    fn half_wins_on_two_datasets_sum_to_one() {
        let mut t = ResultTable::new();
        for d in ["d1", "d2"] {
            for r in 0..5 {
                for s in 0..4 {
                    let base = 0.5 + 0.03 * r as f64;
                    let a = if s % 2 == 0 {
                        base + 0.2 + 0.001 * r as f64
                    } else {
                        // alternating small differences: |t| small
                        base + if r % 2 == 0 { 0.01 } else { -0.01 }
                    };
                    t.insert(d, "A", r, s, a).unwrap();
                    t.insert(d, "B", r, s, base).unwrap();
                }
            }
        }
        let p = penalty_matrix(&t, T_CRITICAL_R5).unwrap();
        assert_eq!(p.entries[0][1], 1.0);
        assert_eq!(p.entries[1][0], 0.0);
    }

    #[test]
    fn incomplete_grid_lists_missing_cells() {
        let t = table_from(&[
            ("d", "a", 0, 0, 0.5),
            ("d", "a", 1, 0, 0.5),
            ("d", "b", 0, 0, 0.5),
        ]);
        match penalty_matrix(&t, T_CRITICAL_R5) {
            Err(Error::IncompleteGrid { missing }) => {
                assert_eq!(missing, vec!["dataset=d algorithm=b repetition=1 step=0"]);
            }
            other => panic!("{other:?}"),
        }
        assert!(performance_profile(&ResultTable::new(), &[0.0]).is_err());
    }

    #[test]
    fn conflicting_rows_rejected() {
        let mut t = ResultTable::new();
        t.insert("d", "a", 0, 0, 0.5).unwrap();
        t.insert("d", "a", 0, 0, 0.5).unwrap();
        assert!(t.insert("d", "a", 0, 0, 0.6).is_err());
        assert!(t.insert("d", "a", 0, 1, 1.5).is_err());
    }

    #[test]
    fn profile_fixtures() {
        let single = table_from(&[("d", "a", 0, 0, 0.3), ("d", "a", 0, 1, 0.4)]);
        let p = performance_profile(&single, &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(p.curve("a").unwrap(), &[1.0, 1.0, 1.0]);

        let two = table_from(&[("d", "good", 0, 0, 0.9), ("d", "bad", 0, 0, 0.8)]);
        let p = performance_profile(&two, &[0.0, 0.1, 1.0]).unwrap();
        assert_eq!(p.curve("bad").unwrap(), &[0.0, 1.0, 1.0]);
        assert_eq!(p.curve("good").unwrap(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn text_grid_has_means() {
        let p = PenaltyMatrix {
            algorithms: vec!["ldm-s".into(), "random".into()],
            entries: vec![vec![0.0, 1.5], vec![0.25, 0.0]],
            column_means: vec![0.125, 0.75],
        };
        let text = p.to_text();
        assert!(text.contains("column mean"));
        assert!(text.contains("1.50"));
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "algorithm,ldm-s,random\nldm-s,0,1.5\nrandom,0.25,0\ncolumn_mean,0.125,0.75\n"
        );
    }

    proptest! {
        #[test]
        fn spearman_rank_invariant(
            a in proptest::collection::vec(-100.0f64..100.0, 3..40),
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let b: Vec<f64> = a.iter().map(|_| r.random_range(-1.0..1.0)).collect();
            let base = spearman(&a, &b);
            prop_assume!(base.is_ok());
            let ta: Vec<f64> = a.iter().map(|v| (v / 10.0).exp()).collect();
            let tb: Vec<f64> = b.iter().map(|v| v * v * v + 3.0 * v).collect();
            prop_assert_eq!(base.unwrap(), spearman(&ta, &tb).unwrap());
        }

        #[test]
        fn t_score_antisymmetric(
            pairs in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..10),
        ) {
            let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let t = paired_t_score(&a, &b).unwrap();
            let u = paired_t_score(&b, &a).unwrap();
            prop_assert!(t == -u || (t.abs() - u.abs()).abs() <= 1e-12 * t.abs().max(1.0));
        }

        #[test]
        fn penalty_bounds(
            accs in proptest::collection::vec(0.0f64..1.0, 2 * 3 * 5 * 2),
        ) {
            let mut t = ResultTable::new();
            let mut it = accs.iter();
            for d in ["x", "y"] {
                for a in ["a", "b", "c"] {
                    for r in 0..5 {
                        for s in 0..2 {
                            t.insert(d, a, r, s, *it.next().unwrap()).unwrap();
                        }
                    }
                }
            }
            let p = penalty_matrix(&t, T_CRITICAL_R5).unwrap();
            for i in 0..3 {
                prop_assert_eq!(p.entries[i][i], 0.0);
                for j in 0..3 {
                    prop_assert!(p.entries[i][j] >= 0.0 && p.entries[i][j] <= 2.0 + 1e-12);
                }
            }
        }
    }
}
