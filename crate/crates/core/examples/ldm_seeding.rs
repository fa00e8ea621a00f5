//! Weights and seeded batch selection on a small hand-made pool.
//!
//! ```bash
//! cargo run --example ldm_seeding
//! ```

use ldm::acquisition::{compute_weights, ldm_seeded_select, seeding_distribution};
use ldm::rng;

fn main() -> ldm::Result<()> {
    let features = vec![
        vec![1.0, 0.0],
        vec![0.8, 0.6],
        vec![0.0, 1.0],
        vec![-0.6, 0.8],
        vec![-1.0, -0.2],
    ];
    let ldm_values = [0.05, 0.1, 0.2, 0.3, 0.5];
    let q = 3;

    let w = compute_weights(&ldm_values, q)?;
    println!("P_q = {:?}, L_q = {}", w.q_partition, w.threshold);
    println!("gamma = {:.4?}", w.gamma);

    // After the smallest-LDM point, candidates far in angle and low in LDM win.
    let second = seeding_distribution(&features, &w.gamma, &[w.q_partition[0]])?;
    println!("second-pick distribution = {:.4?}", second);

    let mut stream = rng::stream(11);
    for _ in 0..3 {
        let batch = ldm_seeded_select(&features, &ldm_values, q, &mut stream)?;
        println!("batch {:?}", batch.indices);
    }
    Ok(())
}
