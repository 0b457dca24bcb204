//! Value types shared by every other module: weight functions and their
//! prior, factor-model and hypergraph-SBM specifications, factor graphs,
//! community assignments and overlap statistics.
//!
//! Colors are 0-based internally. All external formats (see [`crate::io`])
//! use 1-based labels and vertex indices.

use std::collections::HashSet;

use crate::error::{Error, Result};

/// Largest dense weight table we accept (q^k entries).
pub const MAX_TABLE: usize = 1_000_000;

/// Default absolute tolerance for invariant checks.
pub const TOL: f64 = 1e-10;

/// Number of entries of a dense table over `[q]^k`, capped at [`MAX_TABLE`].
pub fn table_len(q: usize, k: usize) -> Result<usize> {
    match q.checked_pow(k as u32) {
        Some(len) if len <= MAX_TABLE => Ok(len),
        _ => Err(Error::InvalidModel(format!(
            "q^k = {q}^{k} exceeds the dense table cap of {MAX_TABLE}"
        ))),
    }
}

/// Row-major index of a color tuple; the first coordinate is most significant.
#[inline]
pub fn tuple_index(colors: &[usize], q: usize) -> usize {
    colors.iter().fold(0, |acc, &c| acc * q + c)
}

/// Inverse of [`tuple_index`].
#[inline]
pub fn tuple_colors(mut idx: usize, q: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = idx % q;
        idx /= q;
    }
}

/// Every permutation of `0..k`, in lexicographic order.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(k), &mut vec![false; k], &mut out);
    out
}

/// A strictly positive weight function on `[q]^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightFunction {
    pub id: usize,
    pub k: usize,
    pub q: usize,
    pub table: Vec<f64>,
}

impl WeightFunction {
    pub fn new(id: usize, k: usize, q: usize, table: Vec<f64>) -> Result<Self> {
        if k < 1 || q < 1 {
            return Err(Error::InvalidModel("k and q must be positive".into()));
        }
        let len = table_len(q, k)?;
        if table.len() != len {
            return Err(Error::InvalidModel(format!(
                "weight table has {} entries, expected q^k = {len}",
                table.len()
            )));
        }
        if let Some(bad) = table.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidModel(format!(
                "weights must be finite and strictly positive, found {bad}"
            )));
        }
        Ok(Self { id, k, q, table })
    }

    pub fn from_fn(id: usize, k: usize, q: usize, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let len = table_len(q, k)?;
        let mut colors = vec![0; k];
        let table = (0..len)
            .map(|idx| {
                tuple_colors(idx, q, &mut colors);
                f(&colors)
            })
            .collect();
        Self::new(id, k, q, table)
    }

    pub fn constant(id: usize, k: usize, q: usize, value: f64) -> Result<Self> {
        Self::from_fn(id, k, q, |_| value)
    }

    #[inline]
    pub fn at(&self, colors: &[usize]) -> f64 {
        self.table[tuple_index(colors, self.q)]
    }

    pub fn is_constant(&self) -> bool {
        let first = self.table[0];
        self.table.iter().all(|w| (w - first).abs() <= TOL * first.abs().max(1.0))
    }

    fn same_table(&self, other: &Self) -> bool {
        self.k == other.k
            && self.q == other.q
            && self
                .table
                .iter()
                .zip(&other.table)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0))
    }
}

/// `ψ^θ(σ_1..σ_k) = ψ(σ_{θ(1)}..σ_{θ(k)})`, with `theta` a 0-based permutation.
///
/// Under this convention `permute_weight(permute_weight(ψ, θ), η)` equals
/// `permute_weight(ψ, η∘θ)` where `(η∘θ)(i) = η[θ[i]]`.
pub fn permute_weight(psi: &WeightFunction, theta: &[usize]) -> Result<WeightFunction> {
    if theta.len() != psi.k {
        return Err(Error::ArityMismatch { expected: psi.k, got: theta.len() });
    }
    let mut seen = vec![false; psi.k];
    for &t in theta {
        if t >= psi.k || std::mem::replace(&mut seen[t], true) {
            return Err(Error::InvalidArgument(format!("{theta:?} is not a permutation")));
        }
    }
    let mut src = vec![0; psi.k];
    WeightFunction::from_fn(psi.id, psi.k, psi.q, |sigma| {
        for (s, &t) in src.iter_mut().zip(theta) {
            *s = sigma[t];
        }
        psi.at(&src)
    })
}

/// A finite prior `p` over weight functions, closed under coordinate permutations.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightPrior {
    entries: Vec<(WeightFunction, f64)>,
}

impl WeightPrior {
    /// Validates the prior. Ids are reassigned to positions in `entries`.
    pub fn new(mut entries: Vec<(WeightFunction, f64)>) -> Result<Self> {
        let Some((first, _)) = entries.first() else {
            return Err(Error::InvalidModel("weight prior is empty".into()));
        };
        let (k, q) = (first.k, first.q);
        let mut total = 0.0;
        for (id, (psi, p)) in entries.iter_mut().enumerate() {
            if psi.k != k || psi.q != q {
                return Err(Error::InvalidModel("weight functions disagree on k or q".into()));
            }
            if !(p.is_finite() && *p > 0.0) {
                return Err(Error::InvalidModel(format!("prior mass {p} is not positive")));
            }
            psi.id = id;
            total += *p;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidModel(format!("prior masses sum to {total}, not 1")));
        }
        let prior = Self { entries };
        if let Some(v) = prior.closure_violation() {
            return Err(Error::InvalidModel(v));
        }
        Ok(prior)
    }

    pub fn point_mass(psi: WeightFunction) -> Result<Self> {
        Self::new(vec![(psi, 1.0)])
    }

    /// Closes an arbitrary list of (table, mass) pairs under coordinate
    /// permutations by spreading each mass evenly over its k! images.
    pub fn symmetrized(entries: Vec<(WeightFunction, f64)>) -> Result<Self> {
        let total: f64 = entries.iter().map(|(_, p)| p).sum();
        let mut out: Vec<(WeightFunction, f64)> = Vec::new();
        for (psi, p) in &entries {
            let perms = permutations(psi.k);
            let share = p / total / perms.len() as f64;
            for theta in &perms {
                let image = permute_weight(psi, theta)?;
                match out.iter_mut().find(|(w, _)| w.same_table(&image)) {
                    Some((_, mass)) => *mass += share,
                    None => out.push((image, share)),
                }
            }
        }
        Self::new(out)
    }

    fn closure_violation(&self) -> Option<String> {
        let k = self.k();
        for (psi, p) in &self.entries {
            for theta in permutations(k) {
                let image = permute_weight(psi, &theta).ok()?;
                let mass: f64 = self
                    .entries
                    .iter()
                    .filter(|(w, _)| w.same_table(&image))
                    .map(|(_, m)| m)
                    .sum();
                let own: f64 = self
                    .entries
                    .iter()
                    .filter(|(w, _)| w.same_table(psi))
                    .map(|(_, m)| m)
                    .sum();
                if (mass - own).abs() > 1e-12 {
                    return Some(format!(
                        "prior is not closed under coordinate permutation {theta:?} (weight {} has mass {p})",
                        psi.id
                    ));
                }
            }
        }
        None
    }

    pub fn entries(&self) -> &[(WeightFunction, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn k(&self) -> usize {
        self.entries[0].0.k
    }

    pub fn q(&self) -> usize {
        self.entries[0].0.q
    }

    pub fn get(&self, id: usize) -> &WeightFunction {
        &self.entries[id].0
    }

    pub fn mass(&self, id: usize) -> f64 {
        self.entries[id].1
    }
}

fn validate_pi(pi: &[f64], q: usize) -> Result<()> {
    if pi.len() != q {
        return Err(Error::InvalidModel(format!("pi has {} entries, q = {q}", pi.len())));
    }
    if pi.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::InvalidModel("pi entries must be strictly positive".into()));
    }
    let total: f64 = pi.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidModel(format!("pi sums to {total}, not 1")));
    }
    Ok(())
}

/// A planted factor model: arity `k`, `q` communities with prior `pi`,
/// weight prior `p`, and average degree `d` (mean clause count `dn/k`).
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub k: usize,
    pub q: usize,
    pub pi: Vec<f64>,
    pub weights: WeightPrior,
    pub d: f64,
    mean_table: Vec<f64>,
}

impl ModelSpec {
    pub fn new(pi: Vec<f64>, weights: WeightPrior, d: f64) -> Result<Self> {
        let (k, q) = (weights.k(), weights.q());
        if k < 2 || q < 2 {
            return Err(Error::InvalidModel(format!("need k >= 2 and q >= 2, got k={k}, q={q}")));
        }
        validate_pi(&pi, q)?;
        if !(d.is_finite() && d >= 0.0) {
            return Err(Error::InvalidModel(format!("average degree {d} must be finite and >= 0")));
        }
        let len = table_len(q, k)?;
        let mut mean_table = vec![0.0; len];
        for (psi, p) in weights.entries() {
            for (m, w) in mean_table.iter_mut().zip(&psi.table) {
                *m += p * w;
            }
        }
        let spec = Self { k, q, pi, weights, d, mean_table };
        let xi = spec.xi();
        if !(xi.is_finite() && xi > 0.0) {
            return Err(Error::InvalidModel(format!("xi = {xi} must be finite and positive")));
        }
        Ok(spec)
    }

    pub fn with_d(&self, d: f64) -> Result<Self> {
        Self::new(self.pi.clone(), self.weights.clone(), d)
    }

    /// `E_p ψ` as a dense table over `[q]^k`.
    pub fn mean_table(&self) -> &[f64] {
        &self.mean_table
    }

    /// `Σ_σ table(σ) ∏_s f(σ_s)` for a color distribution `f`.
    pub fn integrate(&self, table: &[f64], f: &[f64]) -> f64 {
        let mut colors = vec![0; self.k];
        table
            .iter()
            .enumerate()
            .map(|(idx, w)| {
                tuple_colors(idx, self.q, &mut colors);
                w * colors.iter().map(|&c| f[c]).product::<f64>()
            })
            .sum()
    }

    /// ξ = E_{p,π} ψ(σ).
    pub fn xi(&self) -> f64 {
        self.integrate(&self.mean_table, &self.pi)
    }

    /// `E_{p,u} ψ(σ_ω)` for ω uniform over `V^k`, given the color fractions of σ.
    pub fn null_mean_weight(&self, fractions: &[f64]) -> f64 {
        self.integrate(&self.mean_table, fractions)
    }

    /// Expected clause count `dn/k`.
    pub fn mean_clauses(&self, n: usize) -> f64 {
        self.d * n as f64 / self.k as f64
    }
}

/// Hypergraph SBM in tensor form: `M = d·M₀`, hyperedge probability
/// `M(σ_{v_1},..,σ_{v_k}) / C(n, k-1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HsbmSpec {
    pub k: usize,
    pub q: usize,
    pub pi: Vec<f64>,
    pub m0: Vec<f64>,
    pub d: f64,
    pub degree_balanced: bool,
}

impl HsbmSpec {
    pub fn new(k: usize, q: usize, pi: Vec<f64>, m0: Vec<f64>, d: f64) -> Result<Self> {
        if k < 2 || q < 2 {
            return Err(Error::InvalidModel(format!("need k >= 2 and q >= 2, got k={k}, q={q}")));
        }
        validate_pi(&pi, q)?;
        let len = table_len(q, k)?;
        if m0.len() != len {
            return Err(Error::InvalidModel(format!("m0 has {} entries, expected {len}", m0.len())));
        }
        if m0.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::InvalidModel("m0 entries must be strictly positive".into()));
        }
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::InvalidModel(format!("average degree {d} must be positive")));
        }
        let mut colors = vec![0; k];
        let mut swapped = vec![0; k];
        for idx in 0..len {
            tuple_colors(idx, q, &mut colors);
            for s in 0..k - 1 {
                swapped.copy_from_slice(&colors);
                swapped.swap(s, s + 1);
                let other = m0[tuple_index(&swapped, q)];
                if (m0[idx] - other).abs() > TOL {
                    return Err(Error::InvalidModel(format!(
                        "m0 is not symmetric at {colors:?} ({} vs {other})",
                        m0[idx]
                    )));
                }
            }
        }
        let mut spec = Self { k, q, pi, m0, d, degree_balanced: false };
        let total = spec.weighted_sum(None);
        if (total - 1.0).abs() > TOL {
            return Err(Error::InvalidModel(format!("m0 normalization gives {total}, not 1")));
        }
        spec.degree_balanced = (0..q).all(|i| (spec.weighted_sum(Some(i)) - 1.0).abs() <= TOL);
        Ok(spec)
    }

    /// Σ M₀(i_1..i_k) ∏π over all indices, or with the last index pinned to `last`
    /// (and its π factor dropped).
    fn weighted_sum(&self, last: Option<usize>) -> f64 {
        let mut colors = vec![0; self.k];
        let mut total = 0.0;
        for (idx, m) in self.m0.iter().enumerate() {
            tuple_colors(idx, self.q, &mut colors);
            let (head, tail) = colors.split_at(self.k - 1);
            let w = match last {
                Some(i) if tail[0] != i => continue,
                Some(_) => 1.0,
                None => self.pi[tail[0]],
            };
            total += m * w * head.iter().map(|&c| self.pi[c]).product::<f64>();
        }
        total
    }

    /// Symmetric HSBM with uniform π: `M(i..i) = a`, `M = b` otherwise, so that
    /// `d = a·q^{1-k} + b·(1 - q^{1-k})`. For k = 2 this is the usual SBM
    /// with edge probabilities `a/n` and `b/n`.
    pub fn symmetric(k: usize, q: usize, a: f64, b: f64) -> Result<Self> {
        let diag = (q as f64).powi(1 - k as i32);
        let d = a * diag + b * (1.0 - diag);
        let len = table_len(q, k)?;
        let mut colors = vec![0; k];
        let m0 = (0..len)
            .map(|idx| {
                tuple_colors(idx, q, &mut colors);
                if colors.iter().all(|&c| c == colors[0]) {
                    a / d
                } else {
                    b / d
                }
            })
            .collect();
        Self::new(k, q, vec![1.0 / q as f64; q], m0, d)
    }

    /// Erdős–Rényi hypergraph: `M₀ ≡ 1`.
    pub fn erdos_renyi(k: usize, q: usize, d: f64) -> Result<Self> {
        let len = table_len(q, k)?;
        Self::new(k, q, vec![1.0 / q as f64; q], vec![1.0; len], d)
    }

    pub fn with_d(&self, d: f64) -> Result<Self> {
        Self::new(self.k, self.q, self.pi.clone(), self.m0.clone(), d)
    }

    /// `M = d·M₀` at a color tuple.
    pub fn m_at(&self, colors: &[usize]) -> f64 {
        self.d * self.m0[tuple_index(colors, self.q)]
    }
}

/// The factor-model view of an HSBM: a point-mass prior on `ψ = d·M₀`.
pub fn hsbm_to_factor_spec(h: &HsbmSpec) -> Result<ModelSpec> {
    let table = h.m0.iter().map(|m| h.d * m).collect();
    let psi = WeightFunction::new(0, h.k, h.q, table)?;
    ModelSpec::new(h.pi.clone(), WeightPrior::point_mass(psi)?, h.d)
}

/// A factor graph on `n` variables with clauses of arity `k`. Clause `a`
/// carries weight-function id `wids[a]` and the ordered neighbourhood
/// `vars[a*k..(a+1)*k]`. Also used for k-uniform hypergraphs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FactorGraph {
    pub n: usize,
    pub k: usize,
    wids: Vec<usize>,
    vars: Vec<usize>,
    simple: bool,
}

impl FactorGraph {
    pub fn new(n: usize, k: usize) -> Self {
        Self { n, k, wids: Vec::new(), vars: Vec::new(), simple: false }
    }

    pub fn with_capacity(n: usize, k: usize, m: usize) -> Self {
        Self { n, k, wids: Vec::with_capacity(m), vars: Vec::with_capacity(m * k), simple: false }
    }

    pub fn push(&mut self, wid: usize, vars: &[usize]) -> Result<()> {
        if vars.len() != self.k {
            return Err(Error::ArityMismatch { expected: self.k, got: vars.len() });
        }
        if let Some(v) = vars.iter().find(|&&v| v >= self.n) {
            return Err(Error::InvalidArgument(format!("vertex {v} out of range for n = {}", self.n)));
        }
        self.push_unchecked(wid, vars);
        Ok(())
    }

    #[inline]
    pub(crate) fn push_unchecked(&mut self, wid: usize, vars: &[usize]) {
        self.wids.push(wid);
        self.vars.extend_from_slice(vars);
        self.simple = false;
    }

    pub fn m(&self) -> usize {
        self.wids.len()
    }

    #[inline]
    pub fn clause(&self, a: usize) -> (usize, &[usize]) {
        (self.wids[a], &self.vars[a * self.k..(a + 1) * self.k])
    }

    pub fn clauses(&self) -> impl Iterator<Item = (usize, &[usize])> + '_ {
        self.wids.iter().copied().zip(self.vars.chunks_exact(self.k))
    }

    pub(crate) fn set_clause(&mut self, a: usize, wid: usize, vars: &[usize]) {
        self.wids[a] = wid;
        self.vars[a * self.k..(a + 1) * self.k].copy_from_slice(vars);
        self.simple = false;
    }

    /// Whether the simple flag (verified membership in the simple-graph event) is set.
    pub fn is_simple(&self) -> bool {
        self.simple
    }

    /// Every clause has k distinct variables and no two clauses share a variable set.
    pub fn check_simple(&self) -> bool {
        let mut seen = HashSet::with_capacity(self.m());
        let mut key = vec![0; self.k];
        for (_, vars) in self.clauses() {
            key.copy_from_slice(vars);
            key.sort_unstable();
            if key.windows(2).any(|w| w[0] == w[1]) || !seen.insert(key.clone()) {
                return false;
            }
        }
        true
    }

    /// Verifies simplicity and sets the flag.
    pub fn into_simple(mut self) -> Result<Self> {
        if !self.check_simple() {
            return Err(Error::NotSimple);
        }
        self.simple = true;
        Ok(self)
    }

    pub(crate) fn mark_simple_unchecked(mut self) -> Self {
        self.simple = true;
        self
    }

    /// For each vertex, the clauses incident to it (each listed once).
    pub fn incidence(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.n];
        for (a, (_, vars)) in self.clauses().enumerate() {
            for (s, &v) in vars.iter().enumerate() {
                if !vars[..s].contains(&v) {
                    inc[v].push(a);
                }
            }
        }
        inc
    }
}

/// Community labels, 0-based internally.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommunityAssignment {
    pub q: usize,
    pub labels: Vec<usize>,
}

impl CommunityAssignment {
    pub fn new(q: usize, labels: Vec<usize>) -> Result<Self> {
        if let Some(c) = labels.iter().find(|&&c| c >= q) {
            return Err(Error::InvalidArgument(format!("label {c} out of range for q = {q}")));
        }
        Ok(Self { q, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.q];
        for &c in &self.labels {
            counts[c] += 1;
        }
        counts
    }
}

/// Empirical joint distribution of two assignments.
#[derive(Clone, Debug, PartialEq)]
pub struct OverlapMatrix {
    pub q: usize,
    pub r: Vec<f64>,
}

impl OverlapMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.r[i * self.q + j]
    }

    /// `‖R − ππᵀ‖₁` (entrywise).
    pub fn l1_from_product(&self, pi: &[f64]) -> f64 {
        (0..self.q)
            .flat_map(|i| (0..self.q).map(move |j| (i, j)))
            .map(|(i, j)| (self.get(i, j) - pi[i] * pi[j]).abs())
            .sum()
    }
}

fn check_pair(s1: &CommunityAssignment, s2: &CommunityAssignment) -> Result<usize> {
    if s1.len() != s2.len() {
        return Err(Error::LengthMismatch(s1.len(), s2.len()));
    }
    Ok(s1.q.max(s2.q))
}

pub fn overlap_matrix(s1: &CommunityAssignment, s2: &CommunityAssignment) -> Result<OverlapMatrix> {
    let q = check_pair(s1, s2)?;
    let mut r = vec![0.0; q * q];
    let unit = 1.0 / s1.len().max(1) as f64;
    for (&a, &b) in s1.labels.iter().zip(&s2.labels) {
        r[a * q + b] += unit;
    }
    Ok(OverlapMatrix { q, r })
}

/// `ratio[i][j] = |{v: σ¹_v=i, σ²_v=j}| / denom[i]`, with 0 for empty denominators.
fn ratio_matrix(s1: &CommunityAssignment, s2: &CommunityAssignment, q: usize, denom: &[f64]) -> Vec<f64> {
    let mut counts = vec![0.0; q * q];
    for (&a, &b) in s1.labels.iter().zip(&s2.labels) {
        counts[a * q + b] += 1.0;
    }
    for i in 0..q {
        for j in 0..q {
            counts[i * q + j] = if denom[i] > 0.0 { counts[i * q + j] / denom[i] } else { 0.0 };
        }
    }
    counts
}

/// `max_Γ Σ_i w[i][Γ(i)]` over permutations Γ of `[q]`.
pub fn best_assignment(w: &[f64], q: usize) -> f64 {
    if q <= 8 {
        permutations(q)
            .iter()
            .map(|g| (0..q).map(|i| w[i * q + g[i]]).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    } else {
        hungarian_max(w, q)
    }
}

/// Maximum-weight perfect matching on a dense q×q matrix (shortest augmenting
/// paths with potentials, O(q³)).
fn hungarian_max(w: &[f64], q: usize) -> f64 {
    let cost = |i: usize, j: usize| -w[(i - 1) * q + (j - 1)];
    let mut u = vec![0.0; q + 1];
    let mut v = vec![0.0; q + 1];
    let mut p = vec![0usize; q + 1];
    let mut way = vec![0usize; q + 1];
    for i in 1..=q {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; q + 1];
        let mut used = vec![false; q + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=q {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=q {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=q).map(|j| w[(p[j] - 1) * q + (j - 1)]).sum()
}

/// Overlap `A(σ¹, σ²)`: best agreement over relabelings, each class weighted
/// by `1/|{v: σ¹_v = i}|`. An empty class of σ¹ contributes 0.
pub fn overlap_a(s1: &CommunityAssignment, s2: &CommunityAssignment) -> Result<f64> {
    let q = check_pair(s1, s2)?;
    let denom: Vec<f64> = s1.class_counts().iter().map(|&c| c as f64).collect();
    let mut padded = denom;
    padded.resize(q, 0.0);
    Ok(best_assignment(&ratio_matrix(s1, s2, q, &padded), q) / q as f64)
}

/// Variant of [`overlap_a`] with denominators `nπ_i`.
pub fn overlap_a_tilde(s1: &CommunityAssignment, s2: &CommunityAssignment, pi: &[f64]) -> Result<f64> {
    let q = check_pair(s1, s2)?;
    let denom = tilde_denominators(s1.len(), pi, q)?;
    Ok(best_assignment(&ratio_matrix(s1, s2, q, &denom), q) / q as f64)
}

/// [`overlap_a_tilde`] without the maximization (Γ = identity). Meaningful
/// when the estimator's labels are anchored, e.g. by pinning a vertex.
pub fn overlap_a_tilde_identity(s1: &CommunityAssignment, s2: &CommunityAssignment, pi: &[f64]) -> Result<f64> {
    let q = check_pair(s1, s2)?;
    let denom = tilde_denominators(s1.len(), pi, q)?;
    let w = ratio_matrix(s1, s2, q, &denom);
    Ok((0..q).map(|i| w[i * q + i]).sum::<f64>() / q as f64)
}

fn tilde_denominators(n: usize, pi: &[f64], q: usize) -> Result<Vec<f64>> {
    if pi.len() != q {
        return Err(Error::LengthMismatch(pi.len(), q));
    }
    Ok(pi.iter().map(|p| n as f64 * p).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assign(q: usize, labels: &[usize]) -> CommunityAssignment {
        CommunityAssignment::new(q, labels.to_vec()).unwrap()
    }

    #[test]
    fn permute_identity_and_swap() {
        let psi = WeightFunction::new(0, 2, 2, vec![1.0, 3.0, 5.0, 7.0]).unwrap();
        assert_eq!(permute_weight(&psi, &[0, 1]).unwrap(), psi);
        let swapped = permute_weight(&psi, &[1, 0]).unwrap();
        assert_eq!(swapped.at(&[0, 1]), 5.0);
        assert_eq!(swapped.at(&[1, 0]), 3.0);
        assert!(permute_weight(&psi, &[0, 1, 2]).is_err());
        assert!(permute_weight(&psi, &[0, 0]).is_err());
    }

    #[test]
    fn permute_cyclic_k3_matches_index_remap() {
        let q = 3;
        let psi = WeightFunction::from_fn(0, 3, q, |s| 1.0 + (s[0] * 9 + s[1] * 3 + s[2]) as f64).unwrap();
        let theta = [1, 2, 0];
        let image = permute_weight(&psi, &theta).unwrap();
        // Independent remap: walk the source table and scatter each entry.
        let mut expected = vec![0.0; 27];
        for a in 0..q {
            for b in 0..q {
                for c in 0..q {
                    // ψ^θ(x0,x1,x2) = ψ(x1,x2,x0); so source (a,b,c) lands at (c,a,b).
                    expected[c * 9 + a * 3 + b] = psi.table[a * 9 + b * 3 + c];
                }
            }
        }
        assert_eq!(image.table, expected);
    }

    #[test]
    fn permute_composes_exhaustively_k3() {
        let psi = WeightFunction::from_fn(0, 3, 2, |s| 1.0 + (s[0] + 2 * s[1] + 4 * s[2]) as f64).unwrap();
        let perms = permutations(3);
        for theta in &perms {
            for eta in &perms {
                let lhs = permute_weight(&permute_weight(&psi, theta).unwrap(), eta).unwrap();
                let composed: Vec<usize> = (0..3).map(|i| eta[theta[i]]).collect();
                assert_eq!(lhs, permute_weight(&psi, &composed).unwrap());
            }
        }
    }

    #[test]
    fn weight_positivity_enforced() {
        assert!(WeightFunction::new(0, 2, 2, vec![1.0, 0.0, 1.0, 1.0]).is_err());
        assert!(WeightFunction::new(0, 2, 2, vec![1.0, 1.0, 1.0]).is_err());
        assert!(table_len(1000, 3).is_err());
    }

    #[test]
    fn prior_closure_enforced_and_symmetrized() {
        let asym = WeightFunction::new(0, 2, 2, vec![1.0, 3.0, 5.0, 7.0]).unwrap();
        assert!(WeightPrior::point_mass(asym.clone()).is_err());
        let closed = WeightPrior::symmetrized(vec![(asym, 1.0)]).unwrap();
        assert_eq!(closed.len(), 2);
        assert!((closed.mass(0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sbm_to_factor_spec() {
        let h = HsbmSpec::symmetric(2, 2, 5.0, 1.0).unwrap();
        assert!((h.d - 3.0).abs() < 1e-12);
        assert!(h.degree_balanced);
        let spec = hsbm_to_factor_spec(&h).unwrap();
        let psi = spec.weights.get(0);
        assert_eq!(spec.weights.len(), 1);
        for (c, want) in [([0, 0], 5.0), ([1, 1], 5.0), ([0, 1], 1.0), ([1, 0], 1.0)] {
            assert!((psi.at(&c) - want).abs() < 1e-12);
        }
        assert!((spec.xi() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn er_and_k3_symmetric_tensors() {
        let er = hsbm_to_factor_spec(&HsbmSpec::erdos_renyi(2, 3, 2.0).unwrap()).unwrap();
        assert!(er.weights.get(0).table.iter().all(|&w| (w - 2.0).abs() < 1e-12));
        let h = HsbmSpec::symmetric(3, 2, 6.0, 2.0).unwrap();
        // d = 6/4 + 2·3/4 = 3
        assert!((h.d - 3.0).abs() < 1e-12);
        assert!((h.m_at(&[1, 1, 1]) - 6.0).abs() < 1e-12);
        assert!((h.m_at(&[0, 1, 1]) - 2.0).abs() < 1e-12);
        assert!(h.degree_balanced);
    }

    #[test]
    fn hsbm_validation() {
        assert!(HsbmSpec::new(2, 2, vec![0.5, 0.5], vec![1.0, 2.0, 0.5, 1.0], 1.0).is_err());
        assert!(HsbmSpec::new(2, 2, vec![0.5, 0.5], vec![2.0, 2.0, 2.0, 2.0], 1.0).is_err());
        // Normalized but unbalanced: class 0 has higher expected degree.
        let pi = vec![0.5, 0.5];
        let m0 = vec![2.0, 1.0, 1.0, 0.0001];
        let total: f64 = 0.25 * m0.iter().sum::<f64>();
        let m0: Vec<f64> = m0.iter().map(|x| x / total).collect();
        let h = HsbmSpec::new(2, 2, pi, m0, 1.0).unwrap();
        assert!(!h.degree_balanced);
    }

    #[test]
    fn overlap_matrix_examples() {
        let r = overlap_matrix(&assign(2, &[0, 1]), &assign(2, &[0, 1])).unwrap();
        assert_eq!(r.r, vec![0.5, 0.0, 0.0, 0.5]);
        let r = overlap_matrix(&assign(2, &[0, 0, 1, 1]), &assign(2, &[1, 1, 0, 0])).unwrap();
        assert_eq!(r.r, vec![0.0, 0.5, 0.5, 0.0]);
        assert!(overlap_matrix(&assign(2, &[0]), &assign(2, &[0, 1])).is_err());
    }

    #[test]
    fn overlap_matrix_matches_tally() {
        let s1 = assign(3, &[0, 2, 1, 1, 0, 2]);
        let s2 = assign(3, &[2, 2, 0, 1, 1, 0]);
        let r = overlap_matrix(&s1, &s2).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut tally = 0;
                for v in 0..6 {
                    if s1.labels[v] == i && s2.labels[v] == j {
                        tally += 1;
                    }
                }
                assert!((r.get(i, j) - tally as f64 / 6.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn overlap_a_examples() {
        let s = assign(2, &[0, 0, 1, 1]);
        assert!((overlap_a(&s, &s).unwrap() - 1.0).abs() < 1e-15);
        assert!((overlap_a(&s, &assign(2, &[1, 1, 0, 0])).unwrap() - 1.0).abs() < 1e-15);
        assert!((overlap_a(&s, &assign(2, &[0, 1, 0, 1])).unwrap() - 0.5).abs() < 1e-15);
        // Empty class of σ¹ contributes 0.
        assert!((overlap_a(&assign(2, &[0, 0]), &assign(2, &[0, 0])).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn hungarian_matches_permutation_search() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for q in 2..=7 {
            for _ in 0..20 {
                let w: Vec<f64> = (0..q * q).map(|_| rng.random::<f64>()).collect();
                let brute = best_assignment(&w, q);
                assert!((hungarian_max(&w, q) - brute).abs() < 1e-12, "q={q}");
            }
        }
    }

    fn labels(q: usize, n: usize) -> impl Strategy<Value = Vec<usize>> {
        prop::collection::vec(0..q, n)
    }

    proptest! {
        #[test]
        fn prop_permute_composes_k4(
            theta in Just((0..4).collect::<Vec<usize>>()).prop_shuffle(),
            eta in Just((0..4).collect::<Vec<usize>>()).prop_shuffle(),
        ) {
            let psi = WeightFunction::from_fn(0, 4, 2, |s| 1.0 + tuple_index(s, 2) as f64).unwrap();
            let lhs = permute_weight(&permute_weight(&psi, &theta).unwrap(), &eta).unwrap();
            let composed: Vec<usize> = (0..4).map(|i| eta[theta[i]]).collect();
            prop_assert_eq!(lhs, permute_weight(&psi, &composed).unwrap());
        }

        #[test]
        fn prop_overlap_marginals((a, b) in (1usize..40).prop_flat_map(|n| (labels(3, n), labels(3, n)))) {
            let s1 = assign(3, &a);
            let s2 = assign(3, &b);
            let r = overlap_matrix(&s1, &s2).unwrap();
            let n = a.len() as f64;
            let total: f64 = r.r.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            for (i, &c) in s1.class_counts().iter().enumerate() {
                let row: f64 = (0..3).map(|j| r.get(i, j)).sum();
                prop_assert!((row - c as f64 / n).abs() < 1e-12);
            }
            for (j, &c) in s2.class_counts().iter().enumerate() {
                let col: f64 = (0..3).map(|i| r.get(i, j)).sum();
                prop_assert!((col - c as f64 / n).abs() < 1e-12);
            }
            for x in &r.r {
                prop_assert!(((x * n) - (x * n).round()).abs() < 1e-9);
            }
        }

        #[test]
        fn prop_overlap_a_bounds_and_invariance(
            (a, b) in (3usize..30).prop_flat_map(|n| (labels(3, n), labels(3, n))),
            relabel in Just(vec![0usize, 1, 2]).prop_shuffle(),
        ) {
            let s1 = assign(3, &a);
            let s2 = assign(3, &b);
            let base = overlap_a(&s1, &s2).unwrap();
            if s1.class_counts().iter().all(|&c| c > 0) {
                prop_assert!(base >= 1.0 / 3.0 - 1e-12);
            }
            let map = |s: &[usize]| assign(3, &s.iter().map(|&c| relabel[c]).collect::<Vec<_>>());
            prop_assert!((overlap_a(&map(&a), &map(&b)).unwrap() - base).abs() < 1e-12);
            prop_assert!((overlap_a(&s1, &map(&b)).unwrap() - base).abs() < 1e-12);
        }
    }
}
