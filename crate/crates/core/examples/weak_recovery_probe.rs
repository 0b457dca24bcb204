// Posterior diagnostics of weak recovery on exactly solvable instances.
//
//     cargo run --release --example weak_recovery_probe

use blocklab::error::Result;
use blocklab::harness::probe_grid;
use blocklab::model::{hsbm_to_factor_spec, HsbmSpec};
use blocklab::rng::Seed;

pub fn run() -> Result<()> {
    let spec = hsbm_to_factor_spec(&HsbmSpec::symmetric(2, 2, 5.0, 1.0)?)?;
    let grid = probe_grid(&spec, &[0.0, 1.0, 2.25, 3.5], 10, 60, Seed::new(31))?;
    println!("{:>5} {:>12} {:>12} {:>12}", "d", "E‖R−ππᵀ‖₁", "overlap A", "two-point");
    for r in &grid.reports {
        println!("{:>5} {:>12.4} {:>12.4} {:>12.4}", r.d, r.overlap_deviation.mean, r.estimator_overlap.mean, r.two_point_deviation.mean);
    }
    println!("rank correlation with d: {:?}", grid.rank_correlation);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
