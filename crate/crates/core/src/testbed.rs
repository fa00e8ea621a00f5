//! Closed-form 2D world: inputs uniform on the unit disk, hypotheses
//! `h_w(x) = 1[x·w > 0]`.
//!
//! Two such classifiers disagree on the double wedge between their boundary
//! lines, so `ρ(h_w, h_v) = angle(w, v) / π`. The least disagreeing hypothesis
//! for `x0` rotates the boundary of `g` onto the line through `x0`, which
//! gives `L(g, x0) = |π/2 − angle(v, x0)| / π`.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Points on the closed unit disk.
#[derive(Debug, Clone, PartialEq)]
pub struct DiskSample {
    pub points: Vec<[f64; 2]>,
}

impl DiskSample {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn to_vectors(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| p.to_vec()).collect()
    }
}

/// `n` i.i.d. uniform points on the unit disk (polar form with sqrt radius).
pub fn sample_disk<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<DiskSample> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "sample size must be positive".into(),
        ));
    }
    let points = (0..n)
        .map(|_| {
            let r = rng.random::<f64>().sqrt();
            let t = TAU * rng.random::<f64>();
            [r * t.cos(), r * t.sin()]
        })
        .collect();
    Ok(DiskSample { points })
}

/// `n` uniform disk points with the polar angle stratified into `n` equal
/// sectors (one jittered point per sector, radius drawn independently).
///
/// Each point is still uniform on the disk, but the count falling in any
/// wedge through the origin is within a few points of its expectation, which
/// is what `ρ_M` measures for linear classifiers. Useful as a low-variance
/// Monte-Carlo set.
pub fn sample_disk_stratified<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<DiskSample> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "sample size must be positive".into(),
        ));
    }
    let points = (0..n)
        .map(|i| {
            let t = TAU * (i as f64 + rng.random::<f64>()) / n as f64;
            let r = rng.random::<f64>().sqrt();
            [r * t.cos(), r * t.sin()]
        })
        .collect();
    Ok(DiskSample { points })
}

fn check_nonzero(v: [f64; 2], name: &str) -> Result<()> {
    if v[0] == 0.0 && v[1] == 0.0 {
        return Err(Error::InvalidArgument(format!("{name} must be non-zero")));
    }
    if !(v[0].is_finite() && v[1].is_finite()) {
        return Err(Error::InvalidArgument(format!("{name} must be finite")));
    }
    Ok(())
}

/// Unsigned angle between `a` and `b` in `[0, π]`, via `atan2(|a×b|, a·b)`.
pub fn angle_between(a: [f64; 2], b: [f64; 2]) -> f64 {
    let cross = a[0] * b[1] - a[1] * b[0];
    let dot = a[0] * b[0] + a[1] * b[1];
    cross.abs().atan2(dot)
}

/// Exact disagreement `angle(w, v) / π` between two sign classifiers.
pub fn analytic_rho(w: [f64; 2], v: [f64; 2]) -> Result<f64> {
    check_nonzero(w, "w")?;
    check_nonzero(v, "v")?;
    Ok(angle_between(w, v) / PI)
}

/// Exact LDM of `x0` under `g = h_v`: `|π/2 − angle(v, x0)| / π`.
pub fn true_ldm(v: [f64; 2], x0: [f64; 2]) -> Result<f64> {
    check_nonzero(v, "v")?;
    check_nonzero(x0, "x0")?;
    Ok((PI / 2.0 - angle_between(v, x0)).abs() / PI)
}

/// A point at distance `radius` from the origin whose exact LDM under `h_v`
/// is `ldm` (on the positive side of the boundary).
pub fn point_with_ldm(v: [f64; 2], ldm: f64, radius: f64) -> Result<[f64; 2]> {
    check_nonzero(v, "v")?;
    if !(0.0..=0.5).contains(&ldm) {
        return Err(Error::InvalidArgument(format!(
            "ldm {ldm} outside [0, 0.5]"
        )));
    }
    let base = v[1].atan2(v[0]);
    let t = base + PI / 2.0 - ldm * PI;
    Ok([radius * t.cos(), radius * t.sin()])
}

fn sign_class(x: [f64; 2], w: [f64; 2]) -> bool {
    x[0] * w[0] + x[1] * w[1] > 0.0
}

/// Monte-Carlo `P[h_w(x0) ≠ h_v(x0)]` for `w ~ N(v, σ² I)`.
pub fn flip_probability<R: Rng + ?Sized>(
    v: [f64; 2],
    x0: [f64; 2],
    sigma: f64,
    n_draws: usize,
    rng: &mut R,
) -> Result<f64> {
    check_nonzero(v, "v")?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument("sigma must be positive".into()));
    }
    if n_draws == 0 {
        return Err(Error::InvalidArgument("n_draws must be positive".into()));
    }
    let reference = sign_class(x0, v);
    let mut flips = 0usize;
    for _ in 0..n_draws {
        let w = gaussian_around(v, sigma, rng);
        if sign_class(x0, w) != reference {
            flips += 1;
        }
    }
    Ok(flips as f64 / n_draws as f64)
}

fn gaussian_around<R: Rng + ?Sized>(v: [f64; 2], sigma: f64, rng: &mut R) -> [f64; 2] {
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    [v[0] + sigma * a, v[1] + sigma * b]
}

/// One point of an `(x, y ± stderr)` curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub x: f64,
    pub y: f64,
    pub stderr: f64,
}

/// Mean of `analytic_rho(w, v)` over `w ~ N(v, σ² I)` for each σ in the grid.
///
/// The same `n_draws` standard-normal directions are reused at every σ, so
/// the curve is a coupled estimate: for a fixed draw, the angle between
/// `v + σξ` and `v` grows with σ, and so does the mean.
pub fn mean_rho_vs_sigma<R: Rng + ?Sized>(
    v: [f64; 2],
    sigma_grid: &[f64],
    n_draws: usize,
    rng: &mut R,
) -> Result<Vec<CurvePoint>> {
    check_nonzero(v, "v")?;
    if sigma_grid.is_empty() {
        return Err(Error::InvalidArgument("sigma grid is empty".into()));
    }
    if sigma_grid.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::InvalidArgument("sigmas must be positive".into()));
    }
    if sigma_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "sigma grid must be strictly ascending".into(),
        ));
    }
    if n_draws == 0 {
        return Err(Error::InvalidArgument("n_draws must be positive".into()));
    }
    let noise: Vec<[f64; 2]> = (0..n_draws)
        .map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal)])
        .collect();
    let n = n_draws as f64;
    let mut out = Vec::with_capacity(sigma_grid.len());
    for &sigma in sigma_grid {
        let mut sum = 0.0;
        let mut sq = 0.0;
        for xi in &noise {
            let w = [v[0] + sigma * xi[0], v[1] + sigma * xi[1]];
            let rho = angle_between(w, v) / PI;
            sum += rho;
            sq += rho * rho;
        }
        let mean = sum / n;
        let var = if n_draws > 1 {
            ((sq - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        out.push(CurvePoint {
            x: sigma,
            y: mean,
            stderr: (var / n).sqrt(),
        });
    }
    Ok(out)
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
        .collect()
}

/// Write a curve as CSV with header `x,y,stderr`.
pub fn write_curve_csv<W: Write>(curve: &[CurvePoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y", "stderr"])?;
    for p in curve {
        w.write_record([p.x.to_string(), p.y.to_string(), p.stderr.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
