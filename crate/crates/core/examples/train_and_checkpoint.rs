//! Train an MLP, save it as a checkpoint, reload it and perturb its last layer.
//!
//! ```bash
//! cargo run --release --example train_and_checkpoint
//! ```

use ldm::harness::dataset::generate_blobs;
use ldm::harness::BlobsParams;
use ldm::model::{train, ModelSpec, TrainConfig, TrainedModel};
use ldm::rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = generate_blobs(
        &BlobsParams {
            n: 400,
            classes: 4,
            gap: 4.0,
            ..BlobsParams::default()
        },
        5,
    )?;
    let spec = ModelSpec::mlp(2, 16, 4, 0);
    let model = train(&data.features, &data.labels, &spec, &TrainConfig::default())?;
    println!("{} parameters", spec.param_count());
    println!(
        "accuracy {:.3}",
        model.accuracy(&data.features, &data.labels)?
    );

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("mlp.ckpt");
    model.save(&path)?;
    let loaded = TrainedModel::load(&path)?;
    assert_eq!(
        loaded.predict_batch(&data.features)?,
        model.predict_batch(&data.features)?
    );
    println!("reloaded from {}", path.display());

    // Larger perturbations move more predictions.
    let mut stream = rng::stream(2);
    let base = model.predict_batch(&data.features)?;
    for sigma in [0.01, 0.1, 1.0, 10.0] {
        let h = model.perturb_last_layer(sigma, &mut stream)?;
        let changed = h
            .predict_batch(&data.features)?
            .iter()
            .zip(&base)
            .filter(|(a, b)| a != b)
            .count();
        println!(
            "sigma {sigma:>5}: {changed} of {} predictions changed",
            base.len()
        );
    }
    Ok(())
}
