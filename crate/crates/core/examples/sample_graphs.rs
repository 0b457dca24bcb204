// Draws planted graphs from three model families and writes one to disk.
//
//     cargo run --example sample_graphs

use blocklab::error::Result;
use blocklab::io::{graph_to_string, parse_graph, AssignmentDocument};
use blocklab::model::{HsbmSpec, ModelSpec, WeightFunction, WeightPrior};
use blocklab::rng::Seed;
use blocklab::samplers::{condition_simple, gamma_resample, sample_hsbm, sample_poisson_model, Law};

pub fn run() -> Result<()> {
    let seed = Seed::new(2024);

    // Two-community SBM, a = 5, b = 1 (average degree 3).
    let sbm = HsbmSpec::symmetric(2, 2, 5.0, 1.0)?;
    let (sigma, g) = sample_hsbm(&sbm, 2000, seed.fork("sbm"))?;
    let inside = g.clauses().filter(|(_, v)| sigma.labels[v[0]] == sigma.labels[v[1]]).count();
    println!("sbm: n = {}, m = {}, {:.1}% of edges inside a community", g.n, g.m(), 100.0 * inside as f64 / g.m() as f64);

    // 3-uniform hypergraph SBM.
    let h3 = HsbmSpec::symmetric(3, 2, 6.0, 2.0)?;
    let (_, g3) = sample_hsbm(&h3, 1000, seed.fork("hsbm"))?;
    println!("hsbm k=3: m = {} hyperedges (expected {:.0})", g3.m(), h3.d * 1000.0 / 3.0);

    // Planted 3-coloring style factor model: ψ(σ) = 1 − 0.9·1{σ₁ = σ₂}.
    let psi = WeightFunction::from_fn(0, 2, 3, |c| if c[0] == c[1] { 0.1 } else { 1.0 })?;
    let coloring = ModelSpec::new(vec![1.0 / 3.0; 3], WeightPrior::point_mass(psi)?, 4.0)?;
    let (sigma_c, gc) = sample_poisson_model(&coloring, 500, Law::Planted, seed.fork("coloring"));
    let bad = gc.clauses().filter(|(_, v)| sigma_c.labels[v[0]] == sigma_c.labels[v[1]]).count();
    println!("coloring: {} clauses, {bad} monochromatic (null would give about {:.0})", gc.m(), gc.m() as f64 / 3.0);

    // Conditioning on simple graphs, then replacing 30% of clauses with null ones.
    let small = condition_simple(&coloring, 60, Law::Planted, seed.fork("simple"), 100_000)?;
    let (noisy, replaced) = gamma_resample(&small.graph, &coloring, 0.3, seed.fork("gamma"))?;
    println!("simple draw after {} attempts, γ-resampling replaced {replaced}/{} clauses", small.attempts, noisy.m());

    // Text format round trip; the sidecar carries the planted labels (1-based).
    let text = graph_to_string(&small.graph);
    assert_eq!(parse_graph(&text)?.into_simple()?, small.graph);
    let sidecar = serde_json::to_string(&AssignmentDocument::from(&small.sigma))?;
    println!("graph file header: {:?}, sidecar is {} bytes", text.lines().next().unwrap_or(""), sidecar.len());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
