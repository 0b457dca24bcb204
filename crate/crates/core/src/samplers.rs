//! Random graph generation: null and planted factor models (fixed or Poisson
//! clause counts), hypergraph SBMs, rejection onto simple graphs, and
//! γ-resampling.
//!
//! Every sampler is a pure function of its inputs and a [`Seed`].

use std::collections::HashSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{tuple_colors, CommunityAssignment, FactorGraph, HsbmSpec, ModelSpec};
use crate::rng::Seed;

/// Default number of attempts for [`condition_simple`].
pub const DEFAULT_REJECTION_BUDGET: usize = 100_000;

/// Below this many candidate hyperedges per color pattern, [`sample_hsbm`]
/// flips one coin per candidate instead of drawing a binomial count.
const ENUMERATE_LIMIT: u128 = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Law {
    Null,
    Planted,
}

pub fn poisson(mean: f64, rng: &mut impl Rng) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("finite positive Poisson mean").sample(rng) as u64
}

/// σ with i.i.d. π entries.
pub fn sample_assignment(pi: &[f64], n: usize, rng: &mut impl Rng) -> CommunityAssignment {
    let dist = WeightedIndex::new(pi).expect("validated prior");
    CommunityAssignment { q: pi.len(), labels: (0..n).map(|_| dist.sample(rng)).collect() }
}

fn weight_index(spec: &ModelSpec) -> WeightedIndex<f64> {
    WeightedIndex::new(spec.weights.entries().iter().map(|(_, p)| *p)).expect("validated prior")
}

fn null_clause(n: usize, wdist: &WeightedIndex<f64>, rng: &mut impl Rng, buf: &mut [usize]) -> usize {
    for v in buf.iter_mut() {
        *v = rng.random_range(0..n);
    }
    wdist.sample(rng)
}

/// `m` clauses, each with a uniform ordered k-tuple (repetition allowed) and ψ ~ p.
pub fn sample_null(spec: &ModelSpec, n: usize, m: usize, seed: Seed) -> FactorGraph {
    null_graph(spec, n, m, &mut seed.rng())
}

fn null_graph(spec: &ModelSpec, n: usize, m: usize, rng: &mut ChaCha8Rng) -> FactorGraph {
    assert!(n >= 1, "need at least one variable");
    let wdist = weight_index(spec);
    let mut g = FactorGraph::with_capacity(n, spec.k, m);
    let mut buf = vec![0; spec.k];
    for _ in 0..m {
        let wid = null_clause(n, &wdist, rng, &mut buf);
        g.push_unchecked(wid, &buf);
    }
    g
}

/// Exact sampler of the planted clause law given σ: a clause `(ψ, tuple)` has
/// probability proportional to `p(ψ)·ψ(σ_tuple)`.
///
/// Draws `(ψ, color pattern c)` with weight `p(ψ)·ψ(c)·∏_s n_{c_s}`, then each
/// slot uniformly within its color class.
pub struct PlantedClauseSampler {
    k: usize,
    q: usize,
    patterns: usize,
    members: Vec<Vec<usize>>,
    joint: WeightedIndex<f64>,
}

impl PlantedClauseSampler {
    pub fn new(spec: &ModelSpec, sigma: &CommunityAssignment) -> Self {
        let (k, q) = (spec.k, spec.q);
        let mut members = vec![Vec::new(); q];
        for (v, &c) in sigma.labels.iter().enumerate() {
            members[c].push(v);
        }
        let patterns = spec.mean_table().len();
        let mut colors = vec![0; k];
        let class_mass: Vec<f64> = (0..patterns)
            .map(|idx| {
                tuple_colors(idx, q, &mut colors);
                colors.iter().map(|&c| members[c].len() as f64).product()
            })
            .collect();
        let weights = spec.weights.entries().iter().flat_map(|(psi, p)| {
            psi.table.iter().zip(&class_mass).map(move |(w, mass)| p * w * mass)
        });
        let joint = WeightedIndex::new(weights).expect("at least one vertex");
        Self { k, q, patterns, members, joint }
    }

    pub fn sample(&self, rng: &mut impl Rng, buf: &mut [usize]) -> usize {
        let flat = self.joint.sample(rng);
        let (wid, pattern) = (flat / self.patterns, flat % self.patterns);
        tuple_colors(pattern, self.q, buf);
        for slot in buf.iter_mut().take(self.k) {
            let class = &self.members[*slot];
            *slot = class[rng.random_range(0..class.len())];
        }
        wid
    }
}

/// Planted graph with `m` clauses given an assignment.
pub fn sample_planted_given(spec: &ModelSpec, sigma: &CommunityAssignment, m: usize, rng: &mut impl Rng) -> FactorGraph {
    let sampler = PlantedClauseSampler::new(spec, sigma);
    let mut g = FactorGraph::with_capacity(sigma.len(), spec.k, m);
    let mut buf = vec![0; spec.k];
    for _ in 0..m {
        let wid = sampler.sample(rng, &mut buf);
        g.push_unchecked(wid, &buf);
    }
    g
}

/// σ* ~ π^{⊗n}, then `m` planted clauses.
pub fn sample_planted(spec: &ModelSpec, n: usize, m: usize, seed: Seed) -> (CommunityAssignment, FactorGraph) {
    assert!(n >= 1, "need at least one variable");
    let mut rng = seed.rng();
    let sigma = sample_assignment(&spec.pi, n, &mut rng);
    let g = sample_planted_given(spec, &sigma, m, &mut rng);
    (sigma, g)
}

fn draw_model(spec: &ModelSpec, n: usize, law: Law, rng: &mut ChaCha8Rng) -> (CommunityAssignment, FactorGraph) {
    let m = poisson(spec.mean_clauses(n), rng) as usize;
    let sigma = sample_assignment(&spec.pi, n, rng);
    let g = match law {
        Law::Null => null_graph(spec, n, m, rng),
        Law::Planted => sample_planted_given(spec, &sigma, m, rng),
    };
    (sigma, g)
}

/// Clause count `m ~ Poi(dn/k)`, then the requested law. Under the null the
/// returned assignment is independent of the graph.
pub fn sample_poisson_model(spec: &ModelSpec, n: usize, law: Law, seed: Seed) -> (CommunityAssignment, FactorGraph) {
    draw_model(spec, n, law, &mut seed.rng())
}

fn binom(n: u128, r: u128) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

fn binom_f64(n: usize, r: usize) -> f64 {
    if r > n {
        return 0.0;
    }
    let r = r.min(n - r);
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Nondecreasing color sequences of length k (one per unordered pattern).
fn sorted_patterns(q: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, q: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for c in start..q {
            cur.push(c);
            rec(c, q, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, q, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// All `t`-subsets of `pool` (from index `start`), each appended to `cur`
/// while `visit` runs.
fn for_each_subset(pool: &[usize], t: usize, start: usize, cur: &mut Vec<usize>, visit: &mut dyn FnMut(&mut Vec<usize>)) {
    if t == 0 {
        visit(cur);
        return;
    }
    for i in start..=pool.len().saturating_sub(t) {
        cur.push(pool[i]);
        for_each_subset(pool, t - 1, i + 1, cur, visit);
        cur.pop();
    }
}

/// Hypergraph SBM: each of the C(n,k) distinct-vertex hyperedges is present
/// independently with probability `d·M₀(σ_e)/C(n,k−1)`. The output is a simple
/// graph with vertices of each hyperedge in increasing order.
pub fn sample_hsbm(h: &HsbmSpec, n: usize, seed: Seed) -> Result<(CommunityAssignment, FactorGraph)> {
    let mut rng = seed.rng();
    let sigma = sample_assignment(&h.pi, n, &mut rng);
    let g = hsbm_given(h, &sigma, &mut rng)?;
    Ok((sigma, g))
}

/// HSBM hyperedges given the assignment.
pub fn hsbm_given(h: &HsbmSpec, sigma: &CommunityAssignment, rng: &mut impl Rng) -> Result<FactorGraph> {
    let (k, q, n) = (h.k, h.q, sigma.len());
    let mut members = vec![Vec::new(); q];
    for (v, &c) in sigma.labels.iter().enumerate() {
        members[c].push(v);
    }
    let norm = binom_f64(n.saturating_sub(1).max(k - 1), k - 1);
    let mut g = FactorGraph::new(n, k);
    for pattern in sorted_patterns(q, k) {
        let prob = h.m_at(&pattern) / norm;
        if prob > 1.0 {
            return Err(Error::ProbabilityTooLarge(prob));
        }
        let mut mult = vec![0usize; q];
        for &c in &pattern {
            mult[c] += 1;
        }
        let avail = (0..q).fold(1u128, |acc, c| acc.saturating_mul(binom(members[c].len() as u128, mult[c] as u128)));
        if avail == 0 || prob <= 0.0 {
            continue;
        }
        if avail <= ENUMERATE_LIMIT {
            enumerate_pattern(&members, &mult, 0, &mut Vec::with_capacity(k), &mut |edge| {
                if rng.random_bool(prob) {
                    let mut e = edge.to_vec();
                    e.sort_unstable();
                    g.push_unchecked(0, &e);
                }
            });
        } else {
            let count = Binomial::new(avail.min(u64::MAX as u128) as u64, prob)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?
                .sample(rng) as usize;
            let mut seen = HashSet::with_capacity(count);
            let mut e = Vec::with_capacity(k);
            while seen.len() < count {
                e.clear();
                for c in 0..q {
                    let start = e.len();
                    while e.len() < start + mult[c] {
                        let v = members[c][rng.random_range(0..members[c].len())];
                        if !e[start..].contains(&v) {
                            e.push(v);
                        }
                    }
                }
                e.sort_unstable();
                if seen.insert(e.clone()) {
                    g.push_unchecked(0, &e);
                }
            }
        }
    }
    Ok(g.mark_simple_unchecked())
}

fn enumerate_pattern(members: &[Vec<usize>], mult: &[usize], color: usize, cur: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
    if color == mult.len() {
        visit(cur);
        return;
    }
    for_each_subset(&members[color], mult[color], 0, cur, &mut |cur| {
        enumerate_pattern(members, mult, color + 1, cur, visit)
    });
}

/// A draw accepted onto the simple-graph event, with the number of attempts used.
#[derive(Clone, Debug)]
pub struct Conditioned {
    pub sigma: CommunityAssignment,
    pub graph: FactorGraph,
    pub attempts: usize,
}

/// Rejection-samples the Poissonized model until every clause has k distinct
/// variables and no two clauses share a variable set.
pub fn condition_simple(spec: &ModelSpec, n: usize, law: Law, seed: Seed, budget: usize) -> Result<Conditioned> {
    let mut rng = seed.rng();
    for attempts in 1..=budget {
        let (sigma, g) = draw_model(spec, n, law, &mut rng);
        if g.check_simple() {
            return Ok(Conditioned { sigma, graph: g.mark_simple_unchecked(), attempts });
        }
    }
    Err(Error::RejectionBudget(budget))
}

/// Each clause is independently, with probability γ, replaced by a fresh
/// null-law clause. Returns the new graph and the number of replaced clauses.
pub fn gamma_resample(g: &FactorGraph, spec: &ModelSpec, gamma: f64, seed: Seed) -> Result<(FactorGraph, usize)> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!("gamma = {gamma} is outside [0, 1]")));
    }
    let mut rng = seed.rng();
    let wdist = weight_index(spec);
    let mut out = g.clone();
    let mut buf = vec![0; g.k];
    let mut replaced = 0;
    for a in 0..g.m() {
        if rng.random_bool(gamma) {
            let wid = null_clause(g.n, &wdist, &mut rng, &mut buf);
            out.set_clause(a, wid, &buf);
            replaced += 1;
        }
    }
    if replaced == 0 && g.is_simple() {
        out = out.mark_simple_unchecked();
    }
    Ok((out, replaced))
}

/// Runs `f` on child seeds `0..count` in parallel; results are in index order.
pub fn batch<T: Send>(count: usize, seed: Seed, f: impl Fn(Seed) -> T + Sync) -> Vec<T> {
    (0..count).into_par_iter().map(|i| f(seed.child(i as u64))).collect()
}
