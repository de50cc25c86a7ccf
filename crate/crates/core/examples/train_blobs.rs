//! Train the small MLP on separable blobs, encode gallery and queries, and
//! report mAP against the 0.10 chance level.
//!
//! cargo run --release --example train_blobs

use pdh::cli::encode_dataset;
use pdh::synth::BlobSpec;
use pdh::trainer::{train_with_progress, Augmentation};
use pdh::{evaluate, HashCode, ModelConfig, Rng, SgdConfig, TrainConfig};

fn main() -> pdh::Result<()> {
    let spec = BlobSpec::new(10, 200, 2, 10.0)?;
    let gallery = spec.generate(&mut Rng::new(1))?;
    let queries = BlobSpec { per_class: 50, ..spec }.generate(&mut Rng::new(2))?;

    let model = ModelConfig::mlp_small(2, 12);
    let cfg = TrainConfig {
        code_bits: 12,
        sgd: SgdConfig::new(1e-4, 0.9)?,
        epochs: 50,
        augmentation: Augmentation::default(),
        seed: 1,
    };
    let steps = pdh::trainer::steps_per_epoch(&gallery);
    let outcome = train_with_progress(&gallery, &model, &cfg, |step, loss| {
        if (step + 1) % (10 * steps) == 0 {
            println!("epoch {:>3}  batch loss {loss:.3}", (step + 1) / steps);
        }
    })?;

    let book = encode_dataset(&outcome.params, &gallery)?;
    let encoded = encode_dataset(&outcome.params, &queries)?;
    let qs: Vec<(u16, HashCode)> = encoded.entries().iter().map(|e| (e.label, e.code.clone())).collect();
    let report = evaluate(&book, &qs, &[100, 200])?;
    print!("{}", report.to_table());
    println!("chance level 0.10");
    Ok(())
}
