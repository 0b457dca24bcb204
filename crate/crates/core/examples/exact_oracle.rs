// Exact small-n quantities by enumerating all qⁿ assignments.
//
//     cargo run --release --example exact_oracle

use blocklab::error::Result;
use blocklab::model::{hsbm_to_factor_spec, HsbmSpec};
use blocklab::oracle::{exact_log_likelihood, exact_posterior, free_energy_derivative_functional, mutual_information_terms, posterior_overlap_expectation, DEFAULT_BUDGET};
use blocklab::rng::Seed;
use blocklab::samplers::{sample_poisson_model, Law};

pub fn run() -> Result<()> {
    let spec = hsbm_to_factor_spec(&HsbmSpec::symmetric(2, 2, 5.0, 1.0)?)?;
    let n = 12;

    for law in [Law::Null, Law::Planted] {
        let (sigma, g) = sample_poisson_model(&spec, n, law, Seed::new(3));
        let ln_l = exact_log_likelihood(&spec, &g, DEFAULT_BUDGET)?;
        let post = exact_posterior(&spec, &g)?;
        // Agreement of each vertex with vertex 0 under the posterior versus the truth.
        let tp: Vec<String> = (1..4)
            .map(|v| {
                let m = post.two_point(0, v).expect("distinct vertices");
                let same = m[(0, 0)] + m[(1, 1)];
                format!("{v}:{same:.2}({})", if sigma.labels[0] == sigma.labels[v] { "=" } else { "≠" })
            })
            .collect();
        let overlap = posterior_overlap_expectation(&spec, &g, Seed::new(4))?;
        println!("{law:?}: m = {}, log L = {ln_l:+.4}, P(σ₀ = σ_v | G) {}", g.m(), tp.join(" "));
        println!("  E‖R − ππᵀ‖₁ = {:.4} ({}), free-energy functional {:.4}", overlap.value, if overlap.exact { "exact" } else { "sampled" }, free_energy_derivative_functional(&spec, &g)?);
    }

    let mi = mutual_information_terms(&spec, 10, 100, Seed::new(9))?;
    println!("\nn = 10: E log L(G*) = {:.4} ± {:.4}, single-letter term {:.6}, I/n ≈ {:.4} ({})", mi.e_log_l, mi.e_log_l_se, mi.single_letter, mi.i_estimate, mi.label);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
