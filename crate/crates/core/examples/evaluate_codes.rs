//! mAP and precision@k for a perfect code assignment, a noisy one, and
//! random codes.
//!
//! cargo run --release --example evaluate_codes

use pdh::{evaluate, CodeBook, CodeEntry, HashCode, Rng};

fn class_code(class: u16, rng: &mut Rng, flip: f64) -> HashCode {
    let bits: Vec<bool> = (0..16).map(|j| ((class as usize * 2654435761) >> j) & 1 == 1).collect();
    HashCode::from_bits(&bits.iter().map(|&b| b ^ rng.bernoulli(flip)).collect::<Vec<_>>())
}

fn run(name: &str, flip: f64, random: bool) -> pdh::Result<()> {
    let mut rng = Rng::new(5);
    let mut make = |label: u16| {
        if random {
            HashCode::from_bits(&(0..16).map(|_| rng.coin()).collect::<Vec<_>>())
        } else {
            class_code(label, &mut rng, flip)
        }
    };
    let entries: Vec<CodeEntry> =
        (0..1000u64).map(|i| CodeEntry { id: i, label: (i % 10) as u16, code: make((i % 10) as u16) }).collect();
    let book = CodeBook::new(16, entries)?;
    let queries: Vec<(u16, HashCode)> = (0..200u16).map(|i| (i % 10, make(i % 10))).collect();
    let report = evaluate(&book, &queries, &[10, 100])?;
    println!("{name:<8} map {:.4}  p@10 {:.4}  p@100 {:.4}", report.map, report.precision_at_k[&10], report.precision_at_k[&100]);
    Ok(())
}

fn main() -> pdh::Result<()> {
    run("perfect", 0.0, false)?;
    run("noisy", 0.1, false)?;
    run("random", 0.0, true)
}
