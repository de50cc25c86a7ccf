//! The property suite behind `pdh selftest`, driven from code.
//!
//! cargo run --release --example selftest -- [fast|full]

use pdh::selftest::{run_selftest, Level, SelftestOptions};

fn main() -> pdh::Result<()> {
    let level: Level = std::env::args().nth(1).unwrap_or_else(|| "fast".into()).parse().expect("fast or full");
    let report = run_selftest(&SelftestOptions::new(level))?;
    print!("{}", report.to_text());
    std::process::exit(if report.passed() { 0 } else { 3 });
}
