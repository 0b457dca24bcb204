//! Exact answers at small n by enumerating all `q^n` assignments.
//!
//! `L(G) = Σ_σ π^{⊗n}(σ) ∏_a ψ_a(σ_{δa}) / (E_{p,u(σ)} ψ)^m`, where `u(σ)` is the
//! empirical color distribution of σ. Assignments are indexed in mixed radix
//! with vertex 0 as the least significant digit.

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{tuple_colors, CommunityAssignment, FactorGraph, HsbmSpec, ModelSpec};
use crate::rng::Seed;
use crate::samplers::{batch, sample_poisson_model, Law};

/// Maximum number of assignments enumerated by default.
pub const DEFAULT_BUDGET: f64 = 2e7;
/// Maximum number of assignment pairs summed exactly in overlap expectations.
pub const PAIR_BUDGET: f64 = 1e9;
pub const OVERLAP_PAIR_SAMPLES: usize = 1_000_000;
const CHUNK: usize = 1 << 14;

fn check_budget(q: usize, n: usize, budget: f64) -> Result<usize> {
    let states = (q as f64).powi(n as i32);
    if states > budget || states > usize::MAX as f64 {
        return Err(Error::Budget { states, budget });
    }
    Ok(q.pow(n as u32))
}

fn decode(mut idx: usize, q: usize, out: &mut [usize]) {
    for c in out.iter_mut() {
        *c = idx % q;
        idx /= q;
    }
}

/// Log-domain running sum `m + ln s` with Neumaier compensation on `s`.
#[derive(Clone, Copy, Debug)]
struct LogSum {
    max: f64,
    sum: f64,
    comp: f64,
}

impl LogSum {
    fn new() -> Self {
        Self { max: f64::NEG_INFINITY, sum: 0.0, comp: 0.0 }
    }

    fn from_slice(xs: &[f64]) -> Self {
        let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut acc = Self { max, sum: 0.0, comp: 0.0 };
        if max == f64::NEG_INFINITY {
            return acc;
        }
        for &x in xs {
            acc.add_scaled((x - max).exp());
        }
        acc
    }

    fn add_scaled(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }

    fn merge(self, other: Self) -> Self {
        if other.max == f64::NEG_INFINITY {
            return self;
        }
        if self.max == f64::NEG_INFINITY {
            return other;
        }
        let max = self.max.max(other.max);
        let mut out = Self { max, sum: 0.0, comp: 0.0 };
        out.add_scaled(self.total() * (self.max - max).exp());
        out.add_scaled(other.total() * (other.max - max).exp());
        out
    }

    fn ln(&self) -> f64 {
        self.max + self.total().ln()
    }
}

/// Precomputed log tables for one (spec, graph) pair.
struct Enumerator<'a> {
    spec: &'a ModelSpec,
    g: &'a FactorGraph,
    states: usize,
    log_pi: Vec<f64>,
    log_psi: Vec<Vec<f64>>,
    /// `m · ln E_{p,u}ψ`, indexed by class counts in base `n+1`.
    log_norm: Vec<f64>,
}

impl<'a> Enumerator<'a> {
    fn new(spec: &'a ModelSpec, g: &'a FactorGraph, budget: f64) -> Result<Self> {
        if g.k != spec.k {
            return Err(Error::ArityMismatch { expected: spec.k, got: g.k });
        }
        if let Some((w, _)) = g.clauses().find(|(w, _)| *w >= spec.weights.len()) {
            return Err(Error::InvalidArgument(format!("clause weight id {w} not in the prior")));
        }
        let (q, n) = (spec.q, g.n);
        let states = check_budget(q, n, budget)?;
        let radix = n + 1;
        let slots = radix.checked_pow(q as u32).filter(|&s| s <= 50_000_000).ok_or_else(|| {
            Error::Budget { states: (radix as f64).powi(q as i32), budget: 5e7 }
        })?;
        let mut log_norm = vec![f64::NAN; slots];
        let mut counts = vec![0; q];
        let m = g.m() as f64;
        for (key, slot) in log_norm.iter_mut().enumerate() {
            decode(key, radix, &mut counts);
            if counts.iter().sum::<usize>() == n {
                let frac: Vec<f64> = counts.iter().map(|&c| c as f64 / n.max(1) as f64).collect();
                *slot = if m == 0.0 { 0.0 } else { m * spec.null_mean_weight(&frac).ln() };
            }
        }
        Ok(Self {
            spec,
            g,
            states,
            log_pi: spec.pi.iter().map(|p| p.ln()).collect(),
            log_psi: spec.weights.entries().iter().map(|(w, _)| w.table.iter().map(|x| x.ln()).collect()).collect(),
            log_norm,
        })
    }

    /// `ln[π^{⊗n}(σ) L_σ(G)]` for the assignment `sigma`.
    fn log_weight(&self, sigma: &[usize], counts: &mut [usize]) -> f64 {
        let q = self.spec.q;
        counts.iter_mut().for_each(|c| *c = 0);
        let mut w = 0.0;
        for &c in sigma {
            counts[c] += 1;
            w += self.log_pi[c];
        }
        for (wid, vars) in self.g.clauses() {
            let idx = vars.iter().fold(0, |acc, &v| acc * q + sigma[v]);
            w += self.log_psi[wid][idx];
        }
        let key = counts.iter().rev().fold(0, |acc, &c| acc * (self.g.n + 1) + c);
        w - self.log_norm[key]
    }

    /// Applies `f` to every `(index, log weight)` in chunks, in parallel.
    fn chunks<T: Send>(&self, f: impl Fn(usize, &[f64]) -> T + Sync) -> Vec<T> {
        let n_chunks = self.states.div_ceil(CHUNK);
        (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let lo = c * CHUNK;
                let hi = (lo + CHUNK).min(self.states);
                let mut sigma = vec![0; self.g.n];
                let mut counts = vec![0; self.spec.q];
                let logs: Vec<f64> = (lo..hi)
                    .map(|idx| {
                        decode(idx, self.spec.q, &mut sigma);
                        self.log_weight(&sigma, &mut counts)
                    })
                    .collect();
                f(lo, &logs)
            })
            .collect()
    }

    fn log_likelihood(&self) -> f64 {
        self.chunks(|_, logs| LogSum::from_slice(logs)).into_iter().fold(LogSum::new(), LogSum::merge).ln()
    }
}

pub fn exact_log_likelihood(spec: &ModelSpec, g: &FactorGraph, budget: f64) -> Result<f64> {
    Ok(Enumerator::new(spec, g, budget)?.log_likelihood())
}

pub fn exact_likelihood(spec: &ModelSpec, g: &FactorGraph) -> Result<f64> {
    exact_log_likelihood(spec, g, DEFAULT_BUDGET).map(f64::exp)
}

/// The full posterior `μ_G(σ) = π^{⊗n}(σ) L_σ(G) / L(G)`.
#[derive(Clone, Debug)]
pub struct PosteriorTable {
    pub n: usize,
    pub q: usize,
    pub masses: Vec<f64>,
    /// `ln L(G)`, the log normalizing constant.
    pub log_likelihood: f64,
}

pub fn exact_posterior_with(spec: &ModelSpec, g: &FactorGraph, budget: f64) -> Result<PosteriorTable> {
    let e = Enumerator::new(spec, g, budget)?;
    let log_l = e.log_likelihood();
    let masses: Vec<f64> = e.chunks(|_, logs| logs.iter().map(|x| (x - log_l).exp()).collect::<Vec<_>>()).concat();
    Ok(PosteriorTable { n: g.n, q: spec.q, masses, log_likelihood: log_l })
}

pub fn exact_posterior(spec: &ModelSpec, g: &FactorGraph) -> Result<PosteriorTable> {
    exact_posterior_with(spec, g, DEFAULT_BUDGET)
}

impl PosteriorTable {
    pub fn assignment(&self, idx: usize) -> CommunityAssignment {
        let mut labels = vec![0; self.n];
        decode(idx, self.q, &mut labels);
        CommunityAssignment { q: self.q, labels }
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// `⟨f(σ)⟩_G`.
    pub fn expect(&self, f: impl Fn(&[usize]) -> f64) -> f64 {
        let mut sigma = vec![0; self.n];
        self.masses
            .iter()
            .enumerate()
            .map(|(idx, m)| {
                decode(idx, self.q, &mut sigma);
                m * f(&sigma)
            })
            .sum()
    }

    /// `P(σ_u = i | G)` for every i.
    pub fn marginal(&self, u: usize) -> Vec<f64> {
        let stride = self.q.pow(u as u32);
        let mut out = vec![0.0; self.q];
        for (idx, m) in self.masses.iter().enumerate() {
            out[(idx / stride) % self.q] += m;
        }
        out
    }

    /// `P(σ_u = i | G, σ_pin = c)` for every i.
    pub fn pinned_marginal(&self, u: usize, pin: usize, c: usize) -> Vec<f64> {
        let (su, sp) = (self.q.pow(u as u32), self.q.pow(pin as u32));
        let mut out = vec![0.0; self.q];
        for (idx, m) in self.masses.iter().enumerate() {
            if (idx / sp) % self.q == c {
                out[(idx / su) % self.q] += m;
            }
        }
        let z: f64 = out.iter().sum();
        out.iter().map(|x| x / z).collect()
    }

    /// Joint posterior marginal of `(σ_u, σ_v)`.
    pub fn two_point(&self, u: usize, v: usize) -> Result<DMatrix<f64>> {
        if u == v || u >= self.n || v >= self.n {
            return Err(Error::InvalidArgument(format!("two-point marginal needs distinct vertices in range, got {u}, {v}")));
        }
        let (su, sv) = (self.q.pow(u as u32), self.q.pow(v as u32));
        let mut out = DMatrix::zeros(self.q, self.q);
        for (idx, m) in self.masses.iter().enumerate() {
            out[((idx / su) % self.q, (idx / sv) % self.q)] += m;
        }
        Ok(out)
    }

    /// `⟨‖R_{σ¹,σ²} − ππᵀ‖₁⟩_G` for two independent posterior draws: an exact
    /// double sum when `q^{2n} ≤ pair_budget`, otherwise `pairs` sampled pairs.
    pub fn overlap_deviation(&self, pi: &[f64], pair_budget: f64, pairs: usize, seed: Seed) -> OverlapExpectation {
        let states = self.masses.len();
        if (states as f64).powi(2) <= pair_budget {
            let value = if self.q == 2 { self.overlap_exact_binary(pi) } else { self.overlap_exact_general(pi) };
            return OverlapExpectation { value, exact: true, pairs: states * states };
        }
        let dist = WeightedIndex::new(&self.masses).expect("posterior masses are positive");
        let total: f64 = (0..pairs.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut rng = seed.child(c as u64).rng();
                let mut r = vec![0.0; self.q * self.q];
                let len = CHUNK.min(pairs - c * CHUNK);
                (0..len).map(|_| self.deviation(dist.sample(&mut rng), dist.sample(&mut rng), pi, &mut r)).sum::<f64>()
            })
            .collect::<Vec<_>>()
            .iter()
            .sum();
        OverlapExpectation { value: total / pairs as f64, exact: false, pairs }
    }

    fn deviation(&self, a: usize, b: usize, pi: &[f64], r: &mut [f64]) -> f64 {
        let q = self.q;
        r.iter_mut().for_each(|x| *x = 0.0);
        let (mut a, mut b) = (a, b);
        for _ in 0..self.n {
            r[(a % q) * q + b % q] += 1.0;
            a /= q;
            b /= q;
        }
        let n = self.n as f64;
        (0..q * q).map(|ij| (r[ij] / n - pi[ij / q] * pi[ij % q]).abs()).sum()
    }

    fn overlap_exact_general(&self, pi: &[f64]) -> f64 {
        (0..self.masses.len())
            .into_par_iter()
            .map(|a| {
                let mut r = vec![0.0; self.q * self.q];
                let inner: f64 = self.masses.iter().enumerate().map(|(b, mb)| mb * self.deviation(a, b, pi, &mut r)).sum();
                self.masses[a] * inner
            })
            .collect::<Vec<_>>()
            .iter()
            .sum()
    }

    /// q = 2: `R` is determined by popcounts of the two bit patterns.
    fn overlap_exact_binary(&self, pi: &[f64]) -> f64 {
        let n = self.n as u32;
        let nf = self.n as f64;
        let target = [pi[0] * pi[0], pi[0] * pi[1], pi[1] * pi[0], pi[1] * pi[1]];
        // Deviation depends only on (|a|, |b|, |a ∧ b|).
        let table: Vec<f64> = (0..=n)
            .flat_map(|ca| (0..=n).flat_map(move |cb| (0..=n).map(move |c11| (ca, cb, c11))))
            .map(|(ca, cb, c11)| {
                let (n11, n10, n01) = (c11 as f64, ca as f64 - c11 as f64, cb as f64 - c11 as f64);
                let n00 = nf - n11 - n10 - n01;
                if n10 < 0.0 || n01 < 0.0 || n00 < 0.0 {
                    return 0.0;
                }
                // Index r[i*2+j] with i the color under σ¹ (bit set = color 1).
                (n00 / nf - target[0]).abs()
                    + (n01 / nf - target[1]).abs()
                    + (n10 / nf - target[2]).abs()
                    + (n11 / nf - target[3]).abs()
            })
            .collect();
        let r = (n + 1) as usize;
        (0..self.masses.len())
            .into_par_iter()
            .map(|a| {
                let ca = a.count_ones() as usize;
                let inner: f64 = self
                    .masses
                    .iter()
                    .enumerate()
                    .map(|(b, mb)| {
                        let cb = b.count_ones() as usize;
                        let c11 = (a & b).count_ones() as usize;
                        mb * table[(ca * r + cb) * r + c11]
                    })
                    .sum();
                self.masses[a] * inner
            })
            .collect::<Vec<_>>()
            .iter()
            .sum()
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct OverlapExpectation {
    pub value: f64,
    pub exact: bool,
    pub pairs: usize,
}

pub fn two_point(spec: &ModelSpec, g: &FactorGraph, u: usize, v: usize) -> Result<DMatrix<f64>> {
    exact_posterior(spec, g)?.two_point(u, v)
}

pub fn posterior_overlap_expectation(spec: &ModelSpec, g: &FactorGraph, seed: Seed) -> Result<OverlapExpectation> {
    Ok(exact_posterior(spec, g)?.overlap_deviation(&spec.pi, PAIR_BUDGET, OVERLAP_PAIR_SAMPLES, seed))
}

/// `(d/k) E_{p,π}[(ψ/ξ) log(ψ/ξ)]`.
pub fn single_letter_term(spec: &ModelSpec) -> f64 {
    let xi = spec.xi();
    let k = spec.k;
    let mut colors = vec![0; k];
    let mut total = 0.0;
    for (psi, p) in spec.weights.entries() {
        for (idx, &w) in psi.table.iter().enumerate() {
            tuple_colors(idx, spec.q, &mut colors);
            let prob: f64 = colors.iter().map(|&c| spec.pi[c]).product();
            let r = w / xi;
            total += p * prob * r * r.ln();
        }
    }
    spec.d / k as f64 * total
}

/// `(d/k) Σ M₀ log M₀ ∏π`.
pub fn single_letter_hsbm(h: &HsbmSpec) -> f64 {
    let mut colors = vec![0; h.k];
    let sum: f64 = h
        .m0
        .iter()
        .enumerate()
        .map(|(idx, &m)| {
            tuple_colors(idx, h.q, &mut colors);
            m * m.ln() * colors.iter().map(|&c| h.pi[c]).product::<f64>()
        })
        .sum();
    h.d / h.k as f64 * sum
}

/// Monte-Carlo relative entropy and the asymptotic mutual-information formula.
/// `i_estimate` is an asymptotic-formula estimate of `I/n`, not an exact value.
#[derive(Clone, Debug, Serialize)]
pub struct MutualInformation {
    pub n: usize,
    pub samples: usize,
    /// `E log L(G*)`, which equals `D_KL(G* ‖ G)`.
    pub e_log_l: f64,
    pub e_log_l_se: f64,
    pub single_letter: f64,
    pub i_estimate: f64,
    pub label: &'static str,
}

pub fn mutual_information_terms(spec: &ModelSpec, n: usize, samples: usize, seed: Seed) -> Result<MutualInformation> {
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least two planted samples".into()));
    }
    let logs: Vec<f64> = batch(samples, seed, |s| {
        let (_, g) = sample_poisson_model(spec, n, Law::Planted, s);
        exact_log_likelihood(spec, &g, DEFAULT_BUDGET)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let k = samples as f64;
    let mean = logs.iter().sum::<f64>() / k;
    let var = logs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    let single_letter = single_letter_term(spec);
    Ok(MutualInformation {
        n,
        samples,
        e_log_l: mean,
        e_log_l_se: (var / k).sqrt(),
        single_letter,
        i_estimate: -mean / n as f64 + single_letter,
        label: "asymptotic-formula estimate",
    })
}

/// `(1/k) E_{ψ~p, ω~Unif(V^k)} [B log B]` with `B = ⟨ψ(σ_ω) / E_{p,u(σ)}ψ⟩_G`.
pub fn free_energy_derivative_functional(spec: &ModelSpec, g: &FactorGraph) -> Result<f64> {
    let table = exact_posterior(spec, g)?;
    let (n, k, q) = (g.n, spec.k, spec.q);
    let tuples = n.pow(k as u32);
    let work = table.masses.len() as f64 * tuples as f64 * spec.weights.len() as f64;
    if work > 1e10 {
        return Err(Error::Budget { states: work, budget: 1e10 });
    }
    let radix = n + 1;
    let mut counts = vec![0; q];
    let mut sigma = vec![0; n];
    let mut norm = std::collections::HashMap::new();
    // bracket[ψ][ω]
    let mut bracket = vec![vec![0.0; tuples]; spec.weights.len()];
    let mut omega = vec![0; k];
    let mut colors = vec![0; k];
    for (idx, &mu) in table.masses.iter().enumerate() {
        decode(idx, q, &mut sigma);
        counts.iter_mut().for_each(|c| *c = 0);
        sigma.iter().for_each(|&c| counts[c] += 1);
        let key = counts.iter().fold(0, |acc, &c| acc * radix + c);
        let e = *norm.entry(key).or_insert_with(|| {
            let frac: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
            spec.null_mean_weight(&frac)
        });
        let w = mu / e;
        for (wid, (psi, _)) in spec.weights.entries().iter().enumerate() {
            for (t, b) in bracket[wid].iter_mut().enumerate() {
                decode(t, n, &mut omega);
                for (c, &v) in colors.iter_mut().zip(&omega) {
                    *c = sigma[v];
                }
                *b += w * psi.table[colors.iter().fold(0, |acc, &c| acc * q + c)];
            }
        }
    }
    let total: f64 = spec
        .weights
        .entries()
        .iter()
        .zip(&bracket)
        .map(|((_, p), row)| p * row.iter().map(|&b| b * b.ln()).sum::<f64>() / tuples as f64)
        .sum();
    Ok(total / k as f64)
}

/// Per-pair Poisson intensities for k = 2 given σ: `Λ_{uv}` (u < v, total over
/// both orientations and all weights) and loop intensities `Λ_{vv}`.
struct PairIntensities {
    pairs: Vec<f64>,
    loops: Vec<f64>,
}

fn pair_index(n: usize, u: usize, v: usize) -> usize {
    debug_assert!(u < v);
    u * n - u * (u + 1) / 2 + (v - u - 1)
}

fn intensities(spec: &ModelSpec, sigma: Option<&[usize]>, n: usize) -> PairIntensities {
    let q = spec.q;
    let rate = spec.mean_clauses(n) / (n * n) as f64;
    let (scale, color): (f64, Box<dyn Fn(usize) -> usize>) = match sigma {
        Some(s) => {
            let mut counts = vec![0.0; q];
            s.iter().for_each(|&c| counts[c] += 1.0 / n as f64);
            (rate / spec.null_mean_weight(&counts), Box::new(move |v| s[v]))
        }
        None => (rate, Box::new(|_| 0)),
    };
    let mean = spec.mean_table();
    let w = |a: usize, b: usize| if sigma.is_some() { mean[a * q + b] } else { 1.0 };
    let mut pairs = vec![0.0; n * (n - 1) / 2];
    for u in 0..n {
        for v in u + 1..n {
            pairs[pair_index(n, u, v)] = scale * (w(color(u), color(v)) + w(color(v), color(u)));
        }
    }
    let loops = (0..n).map(|v| scale * w(color(v), color(v))).collect();
    PairIntensities { pairs, loops }
}

fn ln_simple_probability(int: &PairIntensities) -> f64 {
    -int.loops.iter().sum::<f64>() + int.pairs.iter().map(|l| l.ln_1p() - l).sum::<f64>()
}

fn require_pairs(spec: &ModelSpec, g: &FactorGraph) -> Result<()> {
    if spec.k != 2 || g.k != 2 {
        return Err(Error::InvalidArgument("conditioned likelihood is implemented for k = 2".into()));
    }
    if !g.check_simple() {
        return Err(Error::NotSimple);
    }
    Ok(())
}

/// `ln Σ_σ exp f(σ)` over all assignments.
fn log_sum_over_assignments(q: usize, n: usize, budget: f64, f: impl Fn(&[usize]) -> f64 + Sync) -> Result<f64> {
    let states = check_budget(q, n, budget)?;
    let acc = (0..states.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut sigma = vec![0; n];
            let logs: Vec<f64> = (c * CHUNK..((c + 1) * CHUNK).min(states))
                .map(|idx| {
                    decode(idx, q, &mut sigma);
                    f(&sigma)
                })
                .collect();
            LogSum::from_slice(&logs)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(LogSum::new(), LogSum::merge);
    Ok(acc.ln())
}

fn ln_prior(spec: &ModelSpec, sigma: &[usize]) -> f64 {
    sigma.iter().map(|&c| spec.pi[c].ln()).sum()
}

/// `ln P*(simple) = ln Σ_σ π(σ) P(simple | σ)` in the Poissonized model.
pub fn ln_planted_simple_probability(spec: &ModelSpec, n: usize, budget: f64) -> Result<f64> {
    Ok(log_sum_over_assignments(spec.q, n, budget, |s| ln_prior(spec, s) + ln_simple_probability(&intensities(spec, Some(s), n)))?)
}

pub fn ln_null_simple_probability(spec: &ModelSpec, n: usize) -> f64 {
    ln_simple_probability(&intensities(spec, None, n))
}

/// Likelihood ratio of the Poissonized models conditioned on simplicity, as
/// `L(G) · P(simple) / P*(simple)`.
pub fn conditioned_likelihood_by_clauses(spec: &ModelSpec, g: &FactorGraph) -> Result<f64> {
    require_pairs(spec, g)?;
    let log_l = exact_log_likelihood(spec, g, DEFAULT_BUDGET)?;
    let ln_star = ln_planted_simple_probability(spec, g.n, DEFAULT_BUDGET)?;
    Ok((log_l + ln_null_simple_probability(spec, g.n) - ln_star).exp())
}

/// The same ratio through the edge form: given σ and simplicity, each pair
/// carries one clause independently with probability `Λ/(1+Λ)`, whose weight
/// and orientation follow their share of `Λ`.
pub fn conditioned_likelihood_by_edges(spec: &ModelSpec, g: &FactorGraph) -> Result<f64> {
    require_pairs(spec, g)?;
    let n = g.n;
    let q = spec.q;
    let rate = spec.mean_clauses(n) / (n * n) as f64;
    let ln_graph = |sigma: Option<&[usize]>| -> f64 {
        let int = intensities(spec, sigma, n);
        let mut present = vec![false; int.pairs.len()];
        let mut ln = ln_simple_probability(&int);
        let scale = match sigma {
            Some(s) => {
                let mut counts = vec![0.0; q];
                s.iter().for_each(|&c| counts[c] += 1.0 / n as f64);
                rate / spec.null_mean_weight(&counts)
            }
            None => rate,
        };
        for (wid, vars) in g.clauses() {
            let (u, v) = (vars[0].min(vars[1]), vars[0].max(vars[1]));
            let e = pair_index(n, u, v);
            present[e] = true;
            let lam = int.pairs[e];
            let specific = spec.weights.mass(wid)
                * scale
                * match sigma {
                    Some(s) => spec.weights.get(wid).table[s[vars[0]] * q + s[vars[1]]],
                    None => 1.0,
                };
            ln += (lam / (1.0 + lam)).ln() + (specific / lam).ln();
        }
        for (e, &lam) in int.pairs.iter().enumerate() {
            if !present[e] {
                ln -= lam.ln_1p();
            }
        }
        ln
    };
    let ln_star_simple = ln_planted_simple_probability(spec, n, DEFAULT_BUDGET)?;
    let ln_star = log_sum_over_assignments(q, n, DEFAULT_BUDGET, |s| ln_prior(spec, s) + ln_graph(Some(s)))?;
    let ln_null = ln_graph(None);
    Ok((ln_star - ln_star_simple - (ln_null - ln_null_simple_probability(spec, n))).exp())
}

/// The graph-SBM likelihood ratio written with monochromatic edge and
/// non-edge counts: edges within a class have probability `a/n`, across
/// classes `b/n`, against `d/n` with `d = (a + (q−1)b)/q`, uniform π.
pub fn sbm_display_likelihood(q: usize, a: f64, b: f64, g: &FactorGraph) -> Result<f64> {
    if g.k != 2 || !g.check_simple() {
        return Err(Error::NotSimple);
    }
    let n = g.n;
    let nf = n as f64;
    let d = (a + (q as f64 - 1.0) * b) / q as f64;
    if a.max(b) >= nf {
        return Err(Error::ProbabilityTooLarge(a.max(b) / nf));
    }
    let total_pairs = (n * (n - 1) / 2) as f64;
    let e = g.m() as f64;
    let null = e * (d / nf).ln() + (total_pairs - e) * (1.0 - d / nf).ln();
    let edges: Vec<(usize, usize)> = g.clauses().map(|(_, v)| (v[0], v[1])).collect();
    let ln_l = log_sum_over_assignments(q, n, DEFAULT_BUDGET, |s| {
        let e0 = edges.iter().filter(|(u, v)| s[*u] == s[*v]).count() as f64;
        let mut class = vec![0.0; q];
        s.iter().for_each(|&c| class[c] += 1.0);
        let mono_pairs: f64 = class.iter().map(|c| c * (c - 1.0) / 2.0).sum();
        let ne0 = mono_pairs - e0;
        let ne1 = total_pairs - mono_pairs - (e - e0);
        -(n as f64) * (q as f64).ln()
            + e0 * (a / nf).ln()
            + (e - e0) * (b / nf).ln()
            + ne0 * (1.0 - a / nf).ln()
            + ne1 * (1.0 - b / nf).ln()
    })?;
    Ok((ln_l - null).exp())
}
