//! Exact cycle counting.
//!
//! Hypergraph ℓ-cycles: distinct vertices `v_1..v_ℓ` and distinct hyperedges
//! `a_1..a_ℓ` with `{v_i, v_{i+1}} ⊆ a_i` (indices mod ℓ). Each class under
//! rotation and reflection is counted once: the walk starts at the smallest
//! vertex and the direction is fixed by `v_2 < v_ℓ` (or `a_1 < a_2` when ℓ = 2).
//!
//! ζ-cycles carry a signature `(ψ_h, s_h, t_h)_h` and are counted with the same
//! rule: smallest variable first, and the first clause index below the last one.
//! A reversed walk has the reversed signature, so every undirected cycle is
//! counted exactly once and `E X_ζ → λ_ζ` for every signature of order ≥ 2.
//! At order 1 (a clause with `δ_s a = δ_t a`) the two orientations `(s,t)`
//! and `(t,s)` describe the same object; only `s < t` is recorded, and its
//! limiting mean is `λ_(ψ,s,t) + λ_(ψ,t,s)`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{FactorGraph, ModelSpec};
use crate::spectral::{compute_phi_st, weighted_self_adjoint_eigs, xi_star};

/// First cycle length in the hypergraph test: 3 for graphs, 2 for k ≥ 3.
pub fn first_length(k: usize) -> usize {
    if k == 2 {
        3
    } else {
        2
    }
}

/// Counts `X_ℓ` for ℓ in `first_length(k)..=k_max`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CycleCensus {
    pub k_max: usize,
    pub counts: BTreeMap<usize, u64>,
}

impl CycleCensus {
    pub fn get(&self, l: usize) -> u64 {
        self.counts.get(&l).copied().unwrap_or(0)
    }
}

/// Vertices of each hyperedge, and for each vertex its incident hyperedges.
struct Incidence<'a> {
    g: &'a FactorGraph,
    inc: Vec<Vec<usize>>,
}

impl Incidence<'_> {
    fn edge(&self, a: usize) -> &[usize] {
        self.g.clause(a).1
    }
}

/// Hypergraph cycle census up to length `k_max`. The graph must carry the
/// simple flag (see [`FactorGraph::into_simple`]).
pub fn count_hyper_cycles(g: &FactorGraph, k_max: usize) -> Result<CycleCensus> {
    if !g.is_simple() {
        return Err(Error::NotSimple);
    }
    let l0 = first_length(g.k);
    let mut counts: BTreeMap<usize, u64> = (l0..=k_max).map(|l| (l, 0)).collect();
    if k_max < l0 {
        return Ok(CycleCensus { k_max, counts });
    }
    let inc = Incidence { g, inc: g.incidence() };
    let per_start: Vec<Vec<u64>> = (0..g.n)
        .into_par_iter()
        .map(|s| {
            let mut acc = vec![0u64; k_max + 1];
            let mut verts = vec![s];
            let mut edges = Vec::with_capacity(k_max);
            hyper_dfs(&inc, k_max, l0, &mut verts, &mut edges, &mut acc);
            acc
        })
        .collect();
    for acc in per_start {
        for (l, c) in acc.into_iter().enumerate() {
            if c > 0 {
                *counts.get_mut(&l).expect("length in range") += c;
            }
        }
    }
    Ok(CycleCensus { k_max, counts })
}

fn hyper_dfs(inc: &Incidence, k_max: usize, l0: usize, verts: &mut Vec<usize>, edges: &mut Vec<usize>, acc: &mut [u64]) {
    let start = verts[0];
    let last = *verts.last().expect("non-empty path");
    let len = verts.len();
    if len >= l0 {
        for &a in &inc.inc[last] {
            if edges.contains(&a) || !inc.edge(a).contains(&start) {
                continue;
            }
            let canonical = if len == 2 { edges[0] < a } else { verts[1] < last };
            if canonical {
                acc[len] += 1;
            }
        }
    }
    if len == k_max {
        return;
    }
    for &a in &inc.inc[last] {
        if edges.contains(&a) {
            continue;
        }
        for &w in inc.edge(a) {
            if w <= start || verts.contains(&w) {
                continue;
            }
            verts.push(w);
            edges.push(a);
            hyper_dfs(inc, k_max, l0, verts, edges, acc);
            edges.pop();
            verts.pop();
        }
    }
}

/// A signature `(ψ_1..ψ_ℓ, s_1,t_1..s_ℓ,t_ℓ)` with 0-based slots.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Signature {
    pub psis: Vec<usize>,
    pub slots: Vec<(usize, usize)>,
}

impl Signature {
    pub fn new(psis: Vec<usize>, slots: Vec<(usize, usize)>) -> Result<Self> {
        if psis.len() != slots.len() || psis.is_empty() {
            return Err(Error::InvalidArgument("signature needs ℓ ≥ 1 weights and slot pairs".into()));
        }
        if slots.iter().any(|(s, t)| s == t) {
            return Err(Error::InvalidArgument("signature slots must satisfy s ≠ t".into()));
        }
        Ok(Self { psis, slots })
    }

    pub fn order(&self) -> usize {
        self.psis.len()
    }
}

/// Counts `X_ζ` for every signature of order ≤ `k_max` that occurs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZetaCensus {
    pub k_max: usize,
    pub counts: BTreeMap<Signature, u64>,
}

impl ZetaCensus {
    /// `Σ_{ζ ∈ S_ℓ} X_ζ`.
    pub fn total(&self, l: usize) -> u64 {
        self.counts.iter().filter(|(z, _)| z.order() == l).map(|(_, c)| c).sum()
    }
}

pub fn count_zeta_cycles(g: &FactorGraph, k_max: usize) -> ZetaCensus {
    let mut slots_of: Vec<Vec<(usize, usize)>> = vec![Vec::new(); g.n];
    for (a, (_, vars)) in g.clauses().enumerate() {
        for (s, &v) in vars.iter().enumerate() {
            slots_of[v].push((a, s));
        }
    }
    let merged = (0..g.n)
        .into_par_iter()
        .map(|start| {
            let mut acc = BTreeMap::new();
            if k_max >= 1 {
                let mut walk = ZetaWalk { g, slots_of: &slots_of, k_max, verts: vec![start], steps: Vec::new() };
                walk.dfs(&mut acc);
            }
            acc
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (z, c) in b {
                *a.entry(z).or_insert(0) += c;
            }
            a
        });
    ZetaCensus { k_max, counts: merged }
}

struct ZetaWalk<'a> {
    g: &'a FactorGraph,
    slots_of: &'a [Vec<(usize, usize)>],
    k_max: usize,
    verts: Vec<usize>,
    /// (clause, s, t) per step.
    steps: Vec<(usize, usize, usize)>,
}

impl ZetaWalk<'_> {
    fn record(&self, close: (usize, usize, usize), acc: &mut BTreeMap<Signature, u64>) {
        let all = self.steps.iter().chain(std::iter::once(&close));
        let sig = Signature {
            psis: all.clone().map(|&(a, _, _)| self.g.clause(a).0).collect(),
            slots: all.map(|&(_, s, t)| (s, t)).collect(),
        };
        *acc.entry(sig).or_insert(0) += 1;
    }

    fn dfs(&mut self, acc: &mut BTreeMap<Signature, u64>) {
        let start = self.verts[0];
        let last = *self.verts.last().expect("non-empty walk");
        let len = self.verts.len();
        // Close the cycle with a fresh clause whose slot s holds `last` and slot t holds `start`.
        for &(a, s) in &self.slots_of[last] {
            if self.steps.iter().any(|st| st.0 == a) {
                continue;
            }
            if len >= 2 && self.steps[0].0 > a {
                continue;
            }
            let vars = self.g.clause(a).1;
            for (t, &v) in vars.iter().enumerate() {
                if t == s || v != start || (len == 1 && t < s) {
                    continue;
                }
                self.record((a, s, t), acc);
            }
        }
        if len == self.k_max {
            return;
        }
        for &(a, s) in &self.slots_of[last] {
            if self.steps.iter().any(|st| st.0 == a) {
                continue;
            }
            let vars = self.g.clause(a).1;
            for (t, &w) in vars.iter().enumerate() {
                if t == s || w <= start || self.verts.contains(&w) {
                    continue;
                }
                self.verts.push(w);
                self.steps.push((a, s, t));
                self.dfs(acc);
                self.steps.pop();
                self.verts.pop();
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ZetaParams {
    pub lambda: f64,
    pub lambda_star: f64,
    pub delta: f64,
}

/// `Φ_ζ = ∏_h Φ_{ψ_h, s_h, t_h}`.
pub fn phi_zeta(spec: &ModelSpec, zeta: &Signature) -> DMatrix<f64> {
    zeta.psis.iter().zip(&zeta.slots).fold(DMatrix::identity(spec.q, spec.q), |acc, (&w, &(s, t))| {
        acc * compute_phi_st(spec.weights.get(w), spec, s, t)
    })
}

/// `λ_ζ = (1/2ℓ)(d/k)^ℓ ∏ p(ψ_h)`, `λ*_ζ = λ_ζ tr Φ_ζ`, `δ_ζ = tr Φ_ζ − 1`.
pub fn zeta_params(spec: &ModelSpec, zeta: &Signature) -> ZetaParams {
    let l = zeta.order() as f64;
    let prior: f64 = zeta.psis.iter().map(|&w| spec.weights.mass(w)).product();
    let lambda = (spec.d / spec.k as f64).powf(l) * prior / (2.0 * l);
    let tr = phi_zeta(spec, zeta).trace();
    ZetaParams { lambda, lambda_star: lambda * tr, delta: tr - 1.0 }
}

/// Limiting null mean of the census entry for `zeta` under the counting
/// convention of this module (order-1 entries absorb both orientations).
pub fn census_mean(spec: &ModelSpec, zeta: &Signature) -> ZetaParams {
    let p = zeta_params(spec, zeta);
    if zeta.order() == 1 {
        ZetaParams { lambda: 2.0 * p.lambda, lambda_star: 2.0 * p.lambda_star, delta: p.delta }
    } else {
        p
    }
}

/// Every signature of order `l` (|Ψ|·k(k−1))^ℓ of them.
pub fn all_signatures(spec: &ModelSpec, l: usize) -> Vec<Signature> {
    let k = spec.k;
    let letters: Vec<(usize, (usize, usize))> = (0..spec.weights.len())
        .flat_map(|w| (0..k).flat_map(move |s| (0..k).filter(move |&t| t != s).map(move |t| (w, (s, t)))))
        .collect();
    let mut out = vec![Signature { psis: Vec::new(), slots: Vec::new() }];
    for _ in 0..l {
        out = out
            .into_iter()
            .flat_map(|z| {
                letters.iter().map(move |&(w, st)| {
                    let mut next = z.clone();
                    next.psis.push(w);
                    next.slots.push(st);
                    next
                })
            })
            .collect();
    }
    out
}

/// `Σ_{ζ∈S_ℓ} λ_ζ δ_ζ²` by explicit enumeration of signatures.
pub fn zeta_sum_raw(spec: &ModelSpec, l: usize) -> f64 {
    all_signatures(spec, l)
        .iter()
        .map(|z| {
            let p = zeta_params(spec, z);
            p.lambda * p.delta * p.delta
        })
        .sum()
}

/// Slot-averaged `E_{ψ,s,t} Φ_{ψ,s,t}` and `E_{ψ,s,t} Φ_{ψ,s,t} ⊗ Φ_{ψ,s,t}`.
fn slot_averaged(spec: &ModelSpec) -> (DMatrix<f64>, DMatrix<f64>) {
    let (q, k) = (spec.q, spec.k);
    let pairs = (k * (k - 1)) as f64;
    let mut phi = DMatrix::zeros(q, q);
    let mut xi = DMatrix::zeros(q * q, q * q);
    for (psi, p) in spec.weights.entries() {
        for s in 0..k {
            for t in (0..k).filter(|&t| t != s) {
                let m = compute_phi_st(psi, spec, s, t);
                xi += m.kronecker(&m) * (p / pairs);
                phi += m * (p / pairs);
            }
        }
    }
    (phi, xi)
}

/// `Σ_{ζ∈S_ℓ} λ_ζ δ_ζ² = (((k−1)d)^ℓ / 2ℓ)·E[(tr ∏ Φ_{ψ_h,s_h,t_h} − 1)²]`, with the
/// expectation expanded as `tr Ξ^ℓ − 2 tr Φ̄^ℓ + 1`; returns the terms for ℓ = 1..=L.
pub fn zeta_sum_reduced(spec: &ModelSpec, l_max: usize) -> Vec<f64> {
    let (phi, xi) = slot_averaged(spec);
    let x = (spec.k - 1) as f64 * spec.d;
    let mut phi_pow = DMatrix::identity(spec.q, spec.q);
    let mut xi_pow = DMatrix::identity(xi.nrows(), xi.ncols());
    (1..=l_max)
        .map(|l| {
            phi_pow = &phi_pow * &phi;
            xi_pow = &xi_pow * &xi;
            let second = xi_pow.trace() - 2.0 * phi_pow.trace() + 1.0;
            x.powi(l as i32) / (2.0 * l as f64) * second
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct LambdaIdentity {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    /// Bound on `|log lhs(∞) − log lhs(L)|` from the geometric tail.
    pub tail_bound: f64,
    pub l: usize,
}

/// Compares `exp(Σ_{ℓ≤L} Σ_{ζ∈S_ℓ} λ_ζ δ_ζ²)` with `∏_{μ ∈ eig Ξ*} (1 − (k−1)dμ)^{−1/2}`.
pub fn lambda_identity_check(spec: &ModelSpec, l: usize) -> Result<LambdaIdentity> {
    let x = (spec.k - 1) as f64 * spec.d;
    let w2: Vec<f64> = spec.pi.iter().flat_map(|a| spec.pi.iter().map(move |b| a * b)).collect();
    let (eigs, _) = weighted_self_adjoint_eigs(&xi_star(spec), &w2);
    let rate = x * eigs.first().map_or(0.0, |e| e.abs());
    if rate >= 1.0 {
        return Err(Error::Divergent(format!("(k-1)·d·λ_KS = {rate} ≥ 1")));
    }
    let lhs = zeta_sum_reduced(spec, l).iter().sum::<f64>().exp();
    let rhs = eigs.iter().map(|mu| (1.0 - x * mu).powf(-0.5)).product::<f64>();
    let dim = eigs.len() as f64;
    let tail_bound = dim * rate.powi(l as i32 + 1) / (2.0 * (l + 1) as f64 * (1.0 - rate));
    Ok(LambdaIdentity { lhs, rhs, gap: (lhs - rhs).abs(), tail_bound, l })
}
