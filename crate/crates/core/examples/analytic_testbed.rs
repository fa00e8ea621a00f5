//! The 2D unit-disk world: exact LDMs, flip probabilities and the ρ(σ) curve.
//!
//! ```bash
//! cargo run --release --example analytic_testbed
//! ```

use std::io;

use ldm::rng;
use ldm::stats::spearman;
use ldm::testbed::{
    analytic_rho, flip_probability, log_grid, mean_rho_vs_sigma, sample_disk, true_ldm,
    write_curve_csv,
};

fn main() -> ldm::Result<()> {
    let v = [1.0, 0.0];
    let mut stream = rng::stream(7);

    // A hypothesis rotated by θ disagrees with h_v on a θ/π fraction of the disk.
    let theta = std::f64::consts::FRAC_PI_4;
    println!(
        "rho at 45 degrees: {:.4}",
        analytic_rho([theta.cos(), theta.sin()], v)?
    );

    // Points close to the boundary have small LDM and flip most often.
    let points = sample_disk(200, &mut stream)?;
    let ldms: Vec<f64> = points
        .points
        .iter()
        .map(|&x| true_ldm(v, x))
        .collect::<ldm::Result<_>>()?;
    let flips: Vec<f64> = points
        .points
        .iter()
        .map(|&x| flip_probability(v, x, 0.3, 5_000, &mut stream))
        .collect::<ldm::Result<_>>()?;
    println!(
        "spearman(ldm, flip probability) = {:.4}",
        spearman(&ldms, &flips)?
    );

    // Mean disagreement grows with the perturbation scale.
    let curve = mean_rho_vs_sigma(v, &log_grid(1e-3, 1e2, 12), 5_000, &mut stream)?;
    write_curve_csv(&curve, io::stdout().lock())?;
    Ok(())
}
