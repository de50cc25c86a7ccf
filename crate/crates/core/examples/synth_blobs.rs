//! Generate a Gaussian-blob dataset, save it as PDHD, and show its
//! generating parameters and exact class posteriors at the class centres.
//!
//! cargo run --example synth_blobs -- [out.pdhd]

use pdh::synth::BlobSpec;
use pdh::trainer::{load_dataset, save_dataset};
use pdh::Rng;

fn main() -> pdh::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "blobs.pdhd".into());
    let spec = BlobSpec::new(10, 200, 2, 10.0)?;
    let seed = 7;
    let ds = spec.generate(&mut Rng::new(seed))?;
    save_dataset(out.as_ref(), &ds)?;
    assert_eq!(load_dataset(out.as_ref())?, ds);
    println!("wrote {} samples of {} classes to {out}", ds.len(), ds.num_classes());
    print!("{}", spec.describe(seed));

    // the same densities restricted to the centres, as an exact oracle world
    let centres: Vec<Vec<f64>> = (0..spec.classes).map(|i| spec.center(i)).collect();
    let world = spec.discrete_world(&centres)?;
    for i in 0..3 {
        let own = world.density(i, i);
        let neighbour = world.density(i, (i + 1) % spec.classes);
        println!("class {i}: D(own centre) = {own:.4}, D(next centre) = {neighbour:.2e}");
    }
    Ok(())
}
