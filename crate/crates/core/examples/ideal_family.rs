//! Ideal hash families from independent fair coins: same-class distance is
//! zero and cross-class distance averages n/2. Also compares the expected
//! Hamming distance of two posterior vectors with sampled codes.
//!
//! cargo run --release --example ideal_family

use pdh::oracle::{expected_cross_distance_mc, ideal_code, sample_family};
use pdh::{expected_hamming, hamming, HashCode, PosteriorVector, Rng};

fn main() -> pdh::Result<()> {
    let mut rng = Rng::new(3);
    let fam = sample_family(&mut rng, 4, 12)?;
    for c in 0..4 {
        println!("class {c}: {:?}", ideal_code(&fam, c)?.to_bits().iter().map(|&b| u8::from(b)).collect::<Vec<_>>());
    }
    println!("d(0, 0) = {}", hamming(&ideal_code(&fam, 0)?, &ideal_code(&fam, 0)?)?);

    let n = 48;
    let trials = 100_000;
    let est = expected_cross_distance_mc(&mut rng, 10, n, (0, 1), trials)?;
    println!("mean cross-class distance {:.4} +- {:.4} (n/2 = {})", est.mean, est.std_err, n / 2);

    let q = PosteriorVector(vec![0.9, 0.2, 0.5, 0.7]);
    let q2 = PosteriorVector(vec![0.1, 0.3, 0.5, 0.6]);
    let draws = 100_000;
    let mut total = 0u64;
    for _ in 0..draws {
        let a: Vec<bool> = q.0.iter().map(|&p| rng.bernoulli(p)).collect();
        let b: Vec<bool> = q2.0.iter().map(|&p| rng.bernoulli(p)).collect();
        total += hamming(&HashCode::from_bits(&a), &HashCode::from_bits(&b))? as u64;
    }
    println!("expected Hamming {:.4}, sampled {:.4}", expected_hamming(&q, &q2)?, total as f64 / draws as f64);
    Ok(())
}
