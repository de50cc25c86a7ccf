//! MNIST subset retrieval with the small conv net: train on the first N
//! images per class, query with test images, print mAP and precision@k.
//!
//! Reads IDX files from $PDH_MNIST_DIR (default /root/data/mnist).
//! cargo run --release --example mnist_retrieval -- [train_per_class] [test_per_class] [epochs]

use std::path::PathBuf;

use pdh::cli::encode_dataset;
use pdh::trainer::{load_mnist_dir, train_with_progress, Augmentation};
use pdh::{evaluate, HashCode, ModelConfig, SgdConfig, TrainConfig};

fn main() -> pdh::Result<()> {
    let arg = |i: usize, default: usize| std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default);
    let (train_n, test_n, epochs) = (arg(1, 1000), arg(2, 200), arg(3, 5));
    let dir = std::env::var_os("PDH_MNIST_DIR").map(PathBuf::from).unwrap_or_else(|| "/root/data/mnist".into());
    let (train, test) = load_mnist_dir(&dir)?;
    let (train, test) = (train.take_per_class(train_n), test.take_per_class(test_n));
    println!("{} training images, {} queries", train.len(), test.len());

    let model = ModelConfig::conv_small(train.shape(), 12);
    let cfg = TrainConfig {
        code_bits: 12,
        sgd: SgdConfig::new(1e-4, 0.9)?,
        epochs,
        augmentation: Augmentation::default(),
        seed: 11,
    };
    let steps = pdh::trainer::steps_per_epoch(&train);
    let mut window = 0.0;
    let outcome = train_with_progress(&train, &model, &cfg, |step, loss| {
        window += loss;
        if (step + 1) % steps == 0 {
            println!("epoch {}  mean loss {:.3}", (step + 1) / steps, window / steps as f64);
            window = 0.0;
        }
    })?;

    let gallery = encode_dataset(&outcome.params, &train)?;
    let queries = encode_dataset(&outcome.params, &test)?;
    let qs: Vec<(u16, HashCode)> = queries.entries().iter().map(|e| (e.label, e.code.clone())).collect();
    let ks: Vec<usize> = (1..=10).map(|i| i * 100).collect();
    let report = evaluate(&gallery, &qs, &ks)?;
    print!("{}", report.to_table());
    println!("max |p@k - p@100| = {:.4}", report.precision_spread());
    Ok(())
}
