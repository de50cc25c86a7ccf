//! Exact bit posteriors on a finite world: the closed-form log-likelihood
//! ratio against brute-force enumeration of the generative model.
//!
//! cargo run --example bayes_oracle

use pdh::oracle::{analytic_posterior, bayes_posterior_bruteforce, class_prior_posterior, sample_family, DiscreteWorld, IdealFamily};
use pdh::Rng;

fn main() -> pdh::Result<()> {
    // two classes, class 0 on the 1-side; D_0(p) = 0.2, D_1(p) = 0.6
    let world = DiscreteWorld::new(vec![vec![0.2, 0.8], vec![0.6, 0.4]])?;
    let fam = IdealFamily::new(2, 1, vec![true, false])?;
    let post = analytic_posterior(&world, &fam, 0, 0)?;
    println!("x = {:.6} (log 3 = {:.6}), q = {}", post.x, 3f64.ln(), post.q);

    let mut rng = Rng::new(1);
    let mut worst = 0.0f64;
    let mut unbalanced_gap = 0.0f64;
    let mut checked = 0;
    while checked < 1000 {
        let nc = 2 + rng.below(6) as usize;
        let world = DiscreteWorld::random(&mut rng, nc, 4)?;
        let fam = sample_family(&mut rng, nc, 3)?;
        let (p, j) = (rng.below(4) as usize, rng.below(3) as usize);
        let (Ok(a), Ok(b)) = (analytic_posterior(&world, &fam, p, j), bayes_posterior_bruteforce(&world, &fam, p, j))
        else {
            continue;
        };
        worst = worst.max((a.q - b).abs());
        // a uniform prior over classes instead of bits only agrees when sides balance
        unbalanced_gap = unbalanced_gap.max((class_prior_posterior(&world, &fam, p, j)? - b).abs());
        checked += 1;
    }
    println!("{checked} tuples: max |closed form - enumeration| = {worst:.2e}");
    println!("class-prior posterior differs by up to {unbalanced_gap:.3} on unbalanced bits");
    Ok(())
}
