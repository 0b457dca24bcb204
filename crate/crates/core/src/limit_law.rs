//! The limiting likelihood ratio `L_∞ = ∏_ℓ (1+α_ℓ)^{X_ℓ} e^{−α_ℓ μ_ℓ}` with
//! independent `X_ℓ ~ Poi(μ_ℓ)`, its planted twin (`X_ℓ ~ Poi((1+α_ℓ)μ_ℓ)`),
//! and the power `β*(α) = E[L_∞ 1{L_∞ ≥ C_α}]` of the optimal test.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::cycles::first_length;
use crate::error::{Error, Result};
use crate::model::HsbmSpec;
use crate::rng::Seed;
use crate::samplers::Law;
use crate::spectral::hsbm_spectrum;

/// Terms with `α_ℓ² μ_ℓ` below this are dropped by the default truncation.
pub const TRUNCATION_TOL: f64 = 1e-12;
pub const BOOTSTRAP_RESAMPLES: usize = 200;
const BLOCK: usize = 4096;

/// Per-length parameters `(α_ℓ, μ_ℓ)` for ℓ = `l0..l0+len`.
#[derive(Clone, Debug, Serialize)]
pub struct CycleTerms {
    pub l0: usize,
    pub alphas: Vec<f64>,
    pub means: Vec<f64>,
    /// `(k−1)d < 1`: finitely many cycles survive and `L_∞` has atoms.
    pub atomic: bool,
}

impl CycleTerms {
    pub fn new(l0: usize, alphas: Vec<f64>, means: Vec<f64>, atomic: bool) -> Result<Self> {
        if alphas.len() != means.len() {
            return Err(Error::LengthMismatch(alphas.len(), means.len()));
        }
        if alphas.is_empty() {
            return Err(Error::InvalidArgument("truncation keeps no cycle length".into()));
        }
        if alphas.iter().any(|&a| !(a > -1.0) || !a.is_finite()) {
            return Err(Error::InvalidArgument("every α_ℓ must be finite and exceed −1".into()));
        }
        if means.iter().any(|&m| !(m >= 0.0) || !m.is_finite()) {
            return Err(Error::InvalidArgument("Poisson means must be finite and nonnegative".into()));
        }
        Ok(Self { l0, alphas, means, atomic })
    }

    /// Terms of an HSBM: `α_ℓ = tr B^ℓ − 1`, `μ_ℓ = ((k−1)d)^ℓ / 2ℓ`, cut at `l_max`
    /// or at the first ℓ with `α_ℓ² μ_ℓ < 1e-12`.
    pub fn hsbm(h: &HsbmSpec, l_max: usize) -> Result<Self> {
        let spec = hsbm_spectrum(h, l_max.max(1));
        let x = (h.k - 1) as f64 * h.d;
        let rate = x * spec.lambda2 * spec.lambda2;
        if rate >= 1.0 {
            return Err(Error::Divergent(format!("(k-1)·d·λ₂² = {rate} ≥ 1: L_∞ has no second moment")));
        }
        let l0 = first_length(h.k);
        Self::truncated(l0, l_max, x, |l| spec.alphas[l - 1], x < 1.0)
    }

    /// Symmetric graph SBM in the λ parametrization: `α_ℓ = (q−1)λ^ℓ`, `μ_ℓ = d^ℓ / 2ℓ`.
    pub fn sbm(q: usize, d: f64, lambda: f64, l_max: usize) -> Result<Self> {
        let rate = d * lambda * lambda;
        if rate >= 1.0 {
            return Err(Error::Divergent(format!("d·λ² = {rate} ≥ 1: L_∞ has no second moment")));
        }
        Self::truncated(3, l_max, d, |l| (q - 1) as f64 * lambda.powi(l as i32), d < 1.0)
    }

    fn truncated(l0: usize, l_max: usize, x: f64, alpha: impl Fn(usize) -> f64, atomic: bool) -> Result<Self> {
        let (mut alphas, mut means) = (Vec::new(), Vec::new());
        for l in l0..=l_max {
            let (a, mu) = (alpha(l), x.powi(l as i32) / (2.0 * l as f64));
            alphas.push(a);
            means.push(mu);
            if a * a * mu < TRUNCATION_TOL {
                break;
            }
        }
        Self::new(l0, alphas, means, atomic)
    }

    /// Largest ℓ kept.
    pub fn l(&self) -> usize {
        self.l0 + self.alphas.len() - 1
    }

    /// `E L_∞² = exp(Σ α_ℓ² μ_ℓ)` over the kept terms.
    pub fn second_moment(&self) -> f64 {
        self.alphas.iter().zip(&self.means).map(|(a, m)| a * a * m).sum::<f64>().exp()
    }

    pub fn is_trivial(&self) -> bool {
        self.alphas.iter().all(|&a| a == 0.0)
    }

    /// The product functional at fixed counts `X_{l0}, X_{l0+1}, …`.
    pub fn value_at(&self, counts: &[u64]) -> f64 {
        self.log_value_at(counts).exp()
    }

    fn log_value_at(&self, counts: &[u64]) -> f64 {
        self.alphas
            .iter()
            .zip(&self.means)
            .zip(counts)
            .map(|((a, mu), &x)| x as f64 * a.ln_1p() - a * mu)
            .sum()
    }
}

/// A single realization of the truncated product.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LimitLawSample {
    pub value: f64,
    pub l: usize,
    pub regime: Law,
}

/// Pre-built Poisson laws for repeated draws under one measure.
pub struct LimitLawSampler<'a> {
    terms: &'a CycleTerms,
    laws: Vec<Option<Poisson<f64>>>,
    regime: Law,
}

impl<'a> LimitLawSampler<'a> {
    pub fn new(terms: &'a CycleTerms, regime: Law) -> Self {
        let laws = terms
            .alphas
            .iter()
            .zip(&terms.means)
            .map(|(a, mu)| {
                let mean = match regime {
                    Law::Null => *mu,
                    Law::Planted => (1.0 + a) * mu,
                };
                (mean > 0.0).then(|| Poisson::new(mean).expect("positive finite mean"))
            })
            .collect();
        Self { terms, laws, regime }
    }

    pub fn draw(&self, rng: &mut impl Rng) -> f64 {
        let mut log = 0.0;
        for ((law, a), mu) in self.laws.iter().zip(&self.terms.alphas).zip(&self.terms.means) {
            let x = law.as_ref().map_or(0.0, |p| p.sample(rng));
            log += x * a.ln_1p() - a * mu;
        }
        log.exp()
    }

    /// `count` draws; blocks of draws use child streams, so the output depends
    /// only on `seed` and `count`.
    pub fn draw_many(&self, count: usize, seed: Seed) -> Vec<f64> {
        let blocks = count.div_ceil(BLOCK);
        (0..blocks)
            .into_par_iter()
            .flat_map_iter(|b| {
                let mut rng = seed.child(b as u64).rng();
                let len = BLOCK.min(count - b * BLOCK);
                (0..len).map(|_| self.draw(&mut rng)).collect::<Vec<_>>()
            })
            .collect()
    }

    pub fn regime(&self) -> Law {
        self.regime
    }
}

pub fn sample_l_infinity(terms: &CycleTerms, seed: Seed) -> LimitLawSample {
    let value = LimitLawSampler::new(terms, Law::Null).draw(&mut seed.rng());
    LimitLawSample { value, l: terms.l(), regime: Law::Null }
}

pub fn sample_l_star_infinity(terms: &CycleTerms, seed: Seed) -> LimitLawSample {
    let value = LimitLawSampler::new(terms, Law::Planted).draw(&mut seed.rng());
    LimitLawSample { value, l: terms.l(), regime: Law::Planted }
}

/// Type-7 quantile of an ascending sample.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// A non-randomized level-α rule "reject when T > c", plus the mixing
/// probability `gamma` on `{T = c}` that makes the size exactly α.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Calibration {
    pub c: f64,
    pub gamma: f64,
    /// All values equal: the rule never rejects.
    pub degenerate: bool,
}

/// Smallest `C` with `P(T > C) ≤ α ≤ P(T ≥ C)` under the empirical law of `values`.
/// For α ≥ 1 every value is rejected and `C` sits below the minimum.
pub fn calibrate_threshold(values: &[f64], alpha: f64) -> Result<Calibration> {
    if values.is_empty() || !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument("calibration needs values and α ∈ (0, 1]".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    let degenerate = lo == hi;
    if alpha >= 1.0 {
        return Ok(Calibration { c: lo - 1.0 - lo.abs(), gamma: 0.0, degenerate });
    }
    let allowed = alpha * n as f64 + 1e-9;
    // Walk distinct values from the top while the tail strictly above stays within α.
    let mut j = n;
    let mut best = hi;
    while j > 0 {
        let v = sorted[j - 1];
        let start = sorted.partition_point(|&x| x < v);
        let greater = n - j;
        if greater as f64 > allowed {
            break;
        }
        best = v;
        j = start;
    }
    let greater = n - sorted.partition_point(|&x| x <= best);
    let equal = n - greater - sorted.partition_point(|&x| x < best);
    let gamma = ((alpha * n as f64 - greater as f64) / equal as f64).clamp(0.0, 1.0);
    Ok(Calibration { c: best, gamma, degenerate })
}

#[derive(Clone, Debug, Serialize)]
pub struct PowerEstimate {
    pub alpha: f64,
    pub c_alpha: f64,
    /// `β*` as `E[L 1{L ≥ C}]` over null draws.
    pub beta_star: f64,
    /// `P(L* ≥ C)` over planted draws.
    pub beta_planted: f64,
    /// Exact-size randomized rule: reject on `L > C'`, and with probability γ on `L = C'`.
    pub beta_randomized: f64,
    pub se_null_weighted: f64,
    pub se_planted: f64,
    /// Bootstrap s.e. of the difference of the two estimators.
    pub se_difference: f64,
    pub agree: bool,
    pub ci: (f64, f64),
    pub l: usize,
    pub samples: usize,
    pub regime: &'static str,
    /// Atoms of `L_∞` with empirical mass ≥ 1e-3 (atomic regime only).
    pub atoms: Option<Vec<(f64, f64)>>,
}

fn threshold(sorted_null: &[f64], alpha: f64, atomic: bool) -> Result<f64> {
    if atomic {
        Ok(calibrate_threshold(sorted_null, alpha)?.c)
    } else {
        Ok(quantile_type7(sorted_null, 1.0 - alpha))
    }
}

fn rejects(v: f64, c: f64, atomic: bool) -> bool {
    if atomic {
        v > c
    } else {
        v >= c
    }
}

fn estimators(null: &[f64], planted: &[f64], c: f64, atomic: bool) -> (f64, f64) {
    let b1 = null.iter().filter(|&&v| rejects(v, c, atomic)).sum::<f64>() / null.len() as f64;
    let b2 = planted.iter().filter(|&&v| rejects(v, c, atomic)).count() as f64 / planted.len() as f64;
    (b1, b2)
}

fn sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// `C_α` and `β*(α)` from `samples` null and `samples` planted draws.
///
/// Continuous regime: `C_α` is the type-7 `(1−α)`-quantile and the test rejects
/// on `L ≥ C_α`. Atomic regime: `C_α` is the smallest constant with
/// `P(L > C) ≤ α ≤ P(L ≥ C)` and the test rejects on `L > C_α`.
pub fn optimal_power(terms: &CycleTerms, alpha: f64, samples: usize, seed: Seed) -> Result<PowerEstimate> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("α = {alpha} outside (0, 1)")));
    }
    if (samples as f64) * alpha < 20.0 {
        return Err(Error::InvalidArgument(format!("{samples} draws give fewer than 20 expected rejections at α = {alpha}")));
    }
    let atomic = terms.atomic;
    let mut null = LimitLawSampler::new(terms, Law::Null).draw_many(samples, seed.fork("null"));
    let planted = LimitLawSampler::new(terms, Law::Planted).draw_many(samples, seed.fork("planted"));
    null.sort_by(f64::total_cmp);
    let c_alpha = threshold(&null, alpha, atomic)?;
    let (beta_star, beta_planted) = estimators(&null, &planted, c_alpha, atomic);
    let rand = calibrate_threshold(&null, alpha)?;
    let beta_randomized = null
        .iter()
        .map(|&v| if v > rand.c { v } else if v == rand.c { rand.gamma * v } else { 0.0 })
        .sum::<f64>()
        / samples as f64;

    let boot: Vec<(f64, f64)> = (0..BOOTSTRAP_RESAMPLES)
        .into_par_iter()
        .map(|b| {
            let mut rng = seed.fork("bootstrap").child(b as u64).rng();
            let mut n2: Vec<f64> = (0..samples).map(|_| null[rng.random_range(0..samples)]).collect();
            let p2: Vec<f64> = (0..samples).map(|_| planted[rng.random_range(0..samples)]).collect();
            n2.sort_by(f64::total_cmp);
            let c = threshold(&n2, alpha, atomic).expect("validated α");
            estimators(&n2, &p2, c, atomic)
        })
        .collect();
    let b1: Vec<f64> = boot.iter().map(|b| b.0).collect();
    let b2: Vec<f64> = boot.iter().map(|b| b.1).collect();
    let diff: Vec<f64> = boot.iter().map(|b| b.0 - b.1).collect();
    let se_difference = sd(&diff);
    let mut sorted_b1 = b1.clone();
    sorted_b1.sort_by(f64::total_cmp);
    let ci = (quantile_type7(&sorted_b1, 0.025), quantile_type7(&sorted_b1, 0.975));

    let atoms = atomic.then(|| {
        let mut atoms = Vec::new();
        let mut i = 0;
        while i < null.len() {
            let j = null.partition_point(|&x| x <= null[i]);
            let mass = (j - i) as f64 / samples as f64;
            if mass >= 1e-3 {
                atoms.push((null[i], mass));
            }
            i = j;
        }
        atoms
    });
    Ok(PowerEstimate {
        alpha,
        c_alpha,
        beta_star,
        beta_planted,
        beta_randomized,
        se_null_weighted: sd(&b1),
        se_planted: sd(&b2),
        se_difference,
        agree: (beta_star - beta_planted).abs() <= 2.0 * se_difference,
        ci,
        l: terms.l(),
        samples,
        regime: if atomic { "atomic" } else { "continuous" },
        atoms,
    })
}
