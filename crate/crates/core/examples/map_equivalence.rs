//! MAP estimate of a bit disagreement versus thresholding both posteriors
//! at 0.5, over a grid of posterior pairs.
//!
//! cargo run --example map_equivalence -- [grid_step]

use pdh::oracle::{map_equivalence_scan, map_sigma, threshold_diff};

fn main() -> pdh::Result<()> {
    let step: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.01);
    let scan = map_equivalence_scan(step)?;
    println!("{} grid points, {} disagreements", scan.points_checked, scan.disagreements.len());
    for b in &scan.boundary {
        println!("boundary ({}, {}): sigma = {}, thresholded difference = {}", b.q, b.q2, b.sigma, b.threshold_diff);
    }
    // the whole line q = 0.5 behaves like the probe above
    for q2 in [0.5, 0.7, 0.9] {
        println!("q = 0.5, q' = {q2}: sigma = {}, diff = {}", map_sigma(0.5, q2), threshold_diff(0.5, q2));
    }
    println!("(0.9, 0.1): sigma = {}, diff = {}", map_sigma(0.9, 0.1), threshold_diff(0.9, 0.1));
    Ok(())
}
