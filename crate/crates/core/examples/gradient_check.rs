//! Hand-written backprop against central finite differences for both
//! preset architectures.
//!
//! cargo run --release --example gradient_check -- [configurations]

use pdh::gradcheck::{check_loss_gradients, check_model_gradients};
use pdh::{InputShape, ModelConfig, Rng};

fn main() -> pdh::Result<()> {
    let configs: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let image = InputShape::Image { height: 28, width: 28, channels: 1 };
    let mut rng = Rng::new(5);
    for (name, arch) in [("mlp-small", ModelConfig::mlp_small(2, 12)), ("conv-small", ModelConfig::conv_small(image, 12))] {
        let net = check_model_gradients(&arch, &mut rng, configs, 3)?;
        let loss = check_loss_gradients(&arch, &mut rng, configs, 3, 5)?;
        println!(
            "{name}: network max rel err {:.2e} over {} coords; loss max rel err {:.2e} over {} coords ({} kink skips)",
            net.max_rel_err, net.coords_checked, loss.max_rel_err, loss.coords_checked, loss.coords_skipped
        );
    }
    Ok(())
}
