// Spectral thresholds for graph and hypergraph block models and a custom factor model.
//
//     cargo run --example thresholds

use blocklab::error::Result;
use blocklab::model::{hsbm_to_factor_spec, HsbmSpec, ModelSpec, WeightFunction, WeightPrior};
use blocklab::rng::Seed;
use blocklab::spectral::{check_min, hsbm_spectrum, i0, ks_threshold, sbm_lambda};

pub fn run() -> Result<()> {
    println!("{:>6} {:>6} {:>8} {:>8} {:>8} {:>10}", "a", "b", "d", "λ", "d_KS", "I₀(q,λ)");
    for (a, b) in [(5.0, 1.0), (3.0, 2.0), (8.0, 0.5), (1.0, 4.0)] {
        let h = HsbmSpec::symmetric(2, 2, a, b)?;
        let s = ks_threshold(&hsbm_to_factor_spec(&h)?);
        let lambda = sbm_lambda(2, a, b);
        println!("{a:>6} {b:>6} {:>8.3} {lambda:>8.4} {:>8.3} {:>10.6}", h.d, s.d_ks.value(), i0(2, lambda)?);
    }

    // k = 3: the HSBM matrix B and the factor-model operator give the same cycle weights.
    let h3 = HsbmSpec::symmetric(3, 2, 6.0, 2.0)?;
    let b = hsbm_spectrum(&h3, 8);
    let f = ks_threshold(&hsbm_to_factor_spec(&h3)?);
    println!("\nk=3 hsbm: eigs(B) = {:?}", b.eigs.iter().map(|e| format!("{e:.4}")).collect::<Vec<_>>());
    println!("  hsbm threshold |λ₂|⁻² = {:.4}, factor threshold ((k−1)λ₂²)⁻¹ = {:.4}", b.d_ks_h.value(), b.d_ks_factor.value());
    println!("  α₃ via B: {:.6}, via Ξ*: {:.6}", b.alphas[2], f.alphas[2]);

    // An antiferromagnetic Potts factor: satisfies (SYM); check (MIN) numerically.
    let psi = WeightFunction::from_fn(0, 2, 3, |c| if c[0] == c[1] { 0.1 } else { 1.0 })?;
    let potts = ModelSpec::new(vec![1.0 / 3.0; 3], WeightPrior::point_mass(psi)?, 4.0)?;
    let s = ks_threshold(&potts);
    let min = check_min(&potts, 16, Seed::new(1));
    println!("\npotts q=3: d_KS = {:.4}, (SYM) {}, (MIN) {} (F(ππᵀ) = {:.6}, best {:.6})", s.d_ks.value(), s.sym.ok, min.holds, min.f_at_product, min.best_f);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
