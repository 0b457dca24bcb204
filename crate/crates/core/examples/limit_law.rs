// The limiting likelihood-ratio law below the KS threshold: moments,
// calibrated thresholds and the optimal power curve β*(α).
//
//     cargo run --release --example limit_law

use blocklab::error::Result;
use blocklab::limit_law::{optimal_power, CycleTerms, LimitLawSampler};
use blocklab::model::HsbmSpec;
use blocklab::rng::Seed;
use blocklab::samplers::Law;

pub fn run() -> Result<()> {
    // q = 2, a = 3, b = 2: d = 2.5, λ = 0.2, far below d_KS = 25.
    let terms = CycleTerms::hsbm(&HsbmSpec::symmetric(2, 2, 3.0, 2.0)?, 64)?;
    println!("{} cycle lengths kept, E L² = {:.6}", terms.l(), terms.second_moment());

    let draws = LimitLawSampler::new(&terms, Law::Null).draw_many(100_000, Seed::new(5));
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    println!("mean of L_∞ over 1e5 null draws: {mean:.5}");

    // A stronger signal gives a visible power curve.
    let strong = CycleTerms::sbm(2, 2.0, 0.6, 64)?;
    println!("\nd = 2, λ = 0.6 (dλ² = 0.72)");
    println!("{:>6} {:>9} {:>9} {:>17}", "α", "C_α", "β*", "95% CI");
    for (i, alpha) in [0.01, 0.05, 0.1, 0.2].into_iter().enumerate() {
        let p = optimal_power(&strong, alpha, 200_000, Seed::new(6).child(i as u64))?;
        println!("{alpha:>6} {:>9.4} {:>9.4}   [{:.4}, {:.4}]", p.c_alpha, p.beta_star, p.ci.0, p.ci.1);
    }

    // Above the threshold L_∞ has no second moment and the law is refused.
    match CycleTerms::sbm(2, 3.0, 2.0 / 3.0, 64) {
        Err(e) => println!("\nd = 3, λ = 2/3: {e}"),
        Ok(_) => println!("\nd = 3, λ = 2/3 unexpectedly accepted"),
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
