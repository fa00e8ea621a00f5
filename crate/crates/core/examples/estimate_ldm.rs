//! Train a logistic model on Gaussian blobs and estimate the LDM of every
//! pool point with shared hypothesis draws.
//!
//! ```bash
//! cargo run --release --example estimate_ldm
//! ```

use ldm::estimator::{estimate_ldm_pool, EstimatorConfig};
use ldm::harness::dataset::generate_blobs;
use ldm::harness::BlobsParams;
use ldm::model::{train, ModelSpec, TrainConfig};

fn main() -> ldm::Result<()> {
    let data = generate_blobs(
        &BlobsParams {
            n: 600,
            classes: 3,
            gap: 3.0,
            ..BlobsParams::default()
        },
        1,
    )?;
    let (train_x, pool) = data.features.split_at(100);
    let model = train(
        train_x,
        &data.labels[..100],
        &ModelSpec::logistic(2, 3, 0),
        &TrainConfig::default(),
    )?;
    println!(
        "training accuracy {:.3}",
        model.accuracy(train_x, &data.labels[..100])?
    );

    let cfg = EstimatorConfig {
        stop_condition: 10,
        mc_size: pool.len(),
        seed: 3,
        ..EstimatorConfig::default()
    };
    let est = estimate_ldm_pool(pool, &model, &cfg)?;

    let mut order: Vec<usize> = (0..est.len()).collect();
    order.sort_by(|&a, &b| est[a].value.total_cmp(&est[b].value));
    println!("closest to the decision boundary:");
    for &i in order.iter().take(5) {
        let p = model.predict_proba(&pool[i])?;
        println!(
            "  x=({:+.2}, {:+.2}) ldm={:.4} probs={:.2?} draws={}",
            pool[i][0], pool[i][1], est[i].value, p, est[i].hypotheses_drawn
        );
    }
    let far = &est[*order.last().expect("pool is non-empty")];
    println!("farthest: ldm={:.4}", far.value);
    Ok(())
}
