//! Grid experiments driven by a JSON config, with JSON results and tidy CSV.
//!
//! ```json
//! {"spec": "sbm.json", "operation": "cycle-test", "seed": 7,
//!  "grid": {"n": [1000], "d": [1.5, 2.0, 2.5, 3.0], "alpha": [0.05]},
//!  "samples": {"calibration": 1000, "null": 400, "planted": 400}}
//! ```
//!
//! `spec` is a path (relative to the config file) or an inline spec object.
//! Every record carries the seed that produced it; wall-clock data lives in a
//! separate metadata block, so identical configs give identical records.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cycles::{count_hyper_cycles, first_length};
use crate::error::{Error, Result};
use crate::harness::{default_kn, power_experiment, weak_recovery_probe, Samples};
use crate::io::{Spec, SpecDocument};
use crate::limit_law::{optimal_power, CycleTerms};
use crate::model::HsbmSpec;
use crate::rng::{fnv1a64, Seed};
use crate::samplers::{batch, sample_hsbm};
use crate::spectral::{check_min, hsbm_spectrum, i0, ks_threshold_with, sbm_lambda, HsbmSpectrum, MinVerdict, SpectralSummary, Threshold, DEFAULT_L_MAX};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Operation {
    Thresholds,
    CycleTest,
    BetaStar,
    CycleCheck,
    EquivProbe,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpecSource {
    Path(PathBuf),
    Inline(SpecDocument),
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleBudget {
    #[serde(default = "SampleBudget::default_calibration")]
    pub calibration: usize,
    #[serde(default = "SampleBudget::default_graphs")]
    pub null: usize,
    #[serde(default = "SampleBudget::default_graphs")]
    pub planted: usize,
    #[serde(default = "SampleBudget::default_limit")]
    pub limit: usize,
}

impl SampleBudget {
    fn default_calibration() -> usize {
        1000
    }
    fn default_graphs() -> usize {
        400
    }
    fn default_limit() -> usize {
        200_000
    }
}

impl Default for SampleBudget {
    fn default() -> Self {
        Self { calibration: 1000, null: 400, planted: 400, limit: 200_000 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub spec: SpecSource,
    pub operation: Operation,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub samples: SampleBudget,
    /// Largest cycle length; defaults to `K_n` for the test and 6 for cycle checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kn: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// One grid cell's outcome.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Record {
    pub cell: usize,
    pub seed: Seed,
    pub params: BTreeMap<String, f64>,
    pub values: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Metadata {
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub tool_version: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config_digest: String,
    pub operation: Operation,
    pub tool_version: String,
    pub records: Vec<Record>,
    pub metadata: Metadata,
}

impl ExperimentResult {
    pub fn failed_cells(&self) -> usize {
        self.records.iter().filter(|r| r.error.is_some()).count()
    }
}

/// Everything the `thresholds` operation reports.
#[derive(Clone, Debug, Serialize)]
pub struct ThresholdReport {
    pub d_ks: Threshold,
    pub lambda_ks: f64,
    pub sym_ok: bool,
    pub summary: SpectralSummary,
    pub hsbm: Option<HsbmSpectrum>,
    pub min_verdict: MinVerdict,
    /// `λ` and `I₀(q, λ)` when the model was given as a symmetric SBM.
    pub lambda: Option<f64>,
    pub i0: Option<f64>,
}

pub fn thresholds_report(spec: &Spec, l_max: usize, min_starts: usize, seed: Seed) -> Result<ThresholdReport> {
    let factor = spec.factor()?;
    let summary = ks_threshold_with(&factor, l_max);
    let (hsbm, lambda, i0v) = match spec {
        Spec::Hsbm { hsbm, ab } => {
            let lam = ab.filter(|_| hsbm.k == 2).map(|(a, b)| sbm_lambda(hsbm.q, a, b));
            let i = lam.map(|l| i0(hsbm.q, l)).transpose()?;
            (Some(hsbm_spectrum(hsbm, l_max)), lam, i)
        }
        Spec::Factor(_) => (None, None, None),
    };
    Ok(ThresholdReport {
        d_ks: summary.d_ks,
        lambda_ks: summary.lambda_ks,
        sym_ok: summary.sym.ok,
        min_verdict: check_min(&factor, min_starts, seed),
        summary,
        hsbm,
        lambda,
        i0: i0v,
    })
}

/// Mean cycle counts on null graphs against `((k−1)d)^ℓ / 2ℓ`.
pub fn cycle_check(k: usize, q: usize, d: f64, n: usize, kmax: usize, samples: usize, seed: Seed) -> Result<BTreeMap<String, f64>> {
    let null = HsbmSpec::erdos_renyi(k, q, d)?;
    let counts: Vec<Vec<f64>> = batch(samples, seed, |s| -> Result<Vec<f64>> {
        let (_, g) = sample_hsbm(&null, n, s)?;
        let c = count_hyper_cycles(&g, kmax)?;
        Ok((first_length(k)..=kmax).map(|l| c.get(l) as f64).collect())
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let mut out = BTreeMap::new();
    for (i, l) in (first_length(k)..=kmax).enumerate() {
        let xs: Vec<f64> = counts.iter().map(|c| c[i]).collect();
        let m = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / m;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
        out.insert(format!("mean_{l}"), mean);
        out.insert(format!("var_{l}"), var);
        out.insert(format!("se_{l}"), (var / m).sqrt());
        out.insert(format!("pred_{l}"), ((k - 1) as f64 * d).powi(l as i32) / (2.0 * l as f64));
    }
    Ok(out)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<(Self, Spec)> {
        let cfg = Self::parse(&fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let spec = cfg.resolve_spec(base)?;
        cfg.validate()?;
        Ok((cfg, spec))
    }

    pub fn resolve_spec(&self, base: &Path) -> Result<Spec> {
        match &self.spec {
            SpecSource::Path(p) => crate::io::read_spec(&base.join(p)),
            SpecSource::Inline(doc) => doc.clone().into_spec(),
        }
    }

    pub fn digest(&self) -> String {
        format!("{:016x}", fnv1a64(serde_json::to_string(self).expect("configs serialize").as_bytes()))
    }

    fn list<T: Clone>(name: &str, v: &Option<Vec<T>>, default: Option<T>) -> Result<Vec<T>> {
        match (v, default) {
            (Some(v), _) if v.is_empty() => Err(Error::InvalidArgument(format!("grid list \"{name}\" is empty"))),
            (Some(v), _) => Ok(v.clone()),
            (None, Some(d)) => Ok(vec![d]),
            (None, None) => Err(Error::InvalidArgument(format!("grid list \"{name}\" is required"))),
        }
    }

    /// Grid cells as `(n, d, α)`; absent axes fall back to the model's `d`,
    /// `α = 0.05`, or (for operations without n) a placeholder `n = 0`.
    pub fn cells(&self, spec: &Spec) -> Result<Vec<(usize, f64, f64)>> {
        let needs_n = matches!(self.operation, Operation::CycleTest | Operation::CycleCheck | Operation::EquivProbe);
        let ns = Self::list("n", &self.grid.n, (!needs_n).then_some(0))?;
        let ds = Self::list("d", &self.grid.d, Some(spec.d()))?;
        let alphas = Self::list("alpha", &self.grid.alpha, Some(0.05))?;
        if self.operation == Operation::Thresholds {
            return Ok(ds.iter().map(|&d| (0, d, 0.0)).collect());
        }
        let mut cells = Vec::with_capacity(ns.len() * ds.len() * alphas.len());
        for &n in &ns {
            for &d in &ds {
                cells.extend(alphas.iter().map(|&a| (n, d, a)));
            }
        }
        Ok(cells)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        for (name, empty) in [
            ("n", g.n.as_ref().is_some_and(|v| v.is_empty())),
            ("d", g.d.as_ref().is_some_and(|v| v.is_empty())),
            ("alpha", g.alpha.as_ref().is_some_and(|v| v.is_empty())),
        ] {
            if empty {
                return Err(Error::InvalidArgument(format!("grid list \"{name}\" is empty")));
            }
        }
        if let Some(a) = g.alpha.iter().flatten().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(Error::InvalidArgument(format!("α = {a} outside (0, 1)")));
        }
        Ok(())
    }
}

fn run_cell(cfg: &ExperimentConfig, spec: &Spec, (n, d, alpha): (usize, f64, f64), seed: Seed) -> Result<(BTreeMap<String, f64>, Option<serde_json::Value>)> {
    let spec = if (d - spec.d()).abs() > 0.0 { spec.with_d(d)? } else { spec.clone() };
    let mut v = BTreeMap::new();
    match cfg.operation {
        Operation::Thresholds => {
            let report = thresholds_report(&spec, DEFAULT_L_MAX, 16, seed)?;
            v.insert("d_ks".into(), report.d_ks.value());
            v.insert("lambda_ks".into(), report.lambda_ks);
            return Ok((v, Some(serde_json::to_value(report)?)));
        }
        Operation::CycleTest => {
            let h = spec.hsbm()?;
            let kn = cfg.kn.unwrap_or_else(|| default_kn(n));
            let s = cfg.samples;
            let samples = Samples { calibration: s.calibration, null: s.null, planted: s.planted, limit: s.limit };
            let r = power_experiment(h, n, alpha, kn, samples, false, seed)?;
            v.insert("power".into(), r.empirical_power);
            v.insert("ci_lo".into(), (r.empirical_power - 1.96 * r.power_se).max(0.0));
            v.insert("ci_hi".into(), (r.empirical_power + 1.96 * r.power_se).min(1.0));
            v.insert("size".into(), r.empirical_size);
            v.insert("size_se".into(), r.size_se);
            v.insert("c_threshold".into(), r.c_threshold);
            v.insert("kn".into(), kn as f64);
            if let Some(b) = &r.beta_star_reference {
                v.insert("beta_star".into(), b.beta_star);
            }
            return Ok((v, Some(serde_json::to_value(r)?)));
        }
        Operation::BetaStar => {
            let terms = CycleTerms::hsbm(spec.hsbm()?, DEFAULT_L_MAX)?;
            let p = optimal_power(&terms, alpha, cfg.samples.limit, seed)?;
            v.insert("beta_star".into(), p.beta_star);
            v.insert("ci_lo".into(), p.ci.0);
            v.insert("ci_hi".into(), p.ci.1);
            v.insert("beta_planted".into(), p.beta_planted);
            v.insert("c_alpha".into(), p.c_alpha);
        }
        Operation::CycleCheck => {
            let kmax = cfg.kn.unwrap_or(6);
            v = cycle_check(spec.k(), spec.q(), d, n, kmax, cfg.samples.null, seed)?;
        }
        Operation::EquivProbe => {
            let r = weak_recovery_probe(&spec.factor()?, n, cfg.samples.planted, seed)?;
            v.insert("overlap_deviation".into(), r.overlap_deviation.mean);
            v.insert("estimator_overlap".into(), r.estimator_overlap.mean);
            v.insert("estimator_overlap_max".into(), r.estimator_overlap_max.mean);
            v.insert("two_point_deviation".into(), r.two_point_deviation.mean);
        }
    }
    Ok((v, None))
}

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis())
}

/// Runs every grid cell; cell failures are recorded and the run continues.
pub fn run(cfg: &ExperimentConfig, spec: &Spec) -> Result<ExperimentResult> {
    cfg.validate()?;
    let cells = cfg.cells(spec)?;
    let started = now_ms();
    let master = Seed::new(cfg.seed);
    let records: Vec<Record> = cells
        .par_iter()
        .enumerate()
        .map(|(i, &cell)| {
            let seed = master.child(i as u64);
            let mut params = BTreeMap::new();
            if cell.0 > 0 {
                params.insert("n".to_string(), cell.0 as f64);
            }
            params.insert("d".to_string(), cell.1);
            if cfg.operation != Operation::Thresholds && cfg.operation != Operation::CycleCheck && cfg.operation != Operation::EquivProbe {
                params.insert("alpha".to_string(), cell.2);
            }
            match run_cell(cfg, spec, cell, seed) {
                Ok((values, report)) => Record { cell: i, seed, params, values, report, error: None },
                Err(e) => Record { cell: i, seed, params, values: BTreeMap::new(), report: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    let version = env!("CARGO_PKG_VERSION").to_string();
    Ok(ExperimentResult {
        config_digest: cfg.digest(),
        operation: cfg.operation,
        tool_version: version.clone(),
        records,
        metadata: Metadata { started_unix_ms: started, finished_unix_ms: now_ms(), tool_version: version },
    })
}

/// Writes `<op>-<timestamp>-<digest>.json` (and a CSV when the operation has
/// a natural plot kind) into `dir`, never overwriting an existing file.
pub fn write_result(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let op = serde_json::to_value(result.operation)?.as_str().unwrap_or("run").to_string();
    let stem = format!("{op}-{}-{}", result.metadata.started_unix_ms, result.config_digest);
    let mut paths = Vec::new();
    let json = fresh_path(dir, &stem, "json");
    fs::write(&json, serde_json::to_string_pretty(result)?)?;
    paths.push(json);
    let kind = match result.operation {
        Operation::CycleTest => Some(PlotKind::PowerCurve),
        Operation::BetaStar => Some(PlotKind::BetaStar),
        Operation::CycleCheck => Some(PlotKind::CycleCheck),
        _ => None,
    };
    if let Some(kind) = kind {
        if let Ok(csv) = emit_plot_data(result, kind) {
            let path = fresh_path(dir, &stem, "csv");
            fs::write(&path, csv)?;
            paths.push(path);
        }
    }
    Ok(paths)
}

fn fresh_path(dir: &Path, stem: &str, ext: &str) -> PathBuf {
    let mut path = dir.join(format!("{stem}.{ext}"));
    let mut i = 1;
    while path.exists() {
        path = dir.join(format!("{stem}-{i}.{ext}"));
        i += 1;
    }
    path
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    PowerCurve,
    BetaStar,
    CycleCheck,
}

fn get(r: &Record, map: &BTreeMap<String, f64>, key: &str) -> Result<f64> {
    map.get(key).copied().ok_or_else(|| Error::InvalidArgument(format!("cell {} has no column \"{key}\"", r.cell)))
}

/// Tidy CSV for plotting. Failed cells are skipped.
pub fn emit_plot_data(result: &ExperimentResult, kind: PlotKind) -> Result<String> {
    let mut out = String::new();
    let ok = result.records.iter().filter(|r| r.error.is_none());
    match kind {
        PlotKind::PowerCurve | PlotKind::BetaStar => {
            let (x, y) = if kind == PlotKind::PowerCurve { ("d", "power") } else { ("alpha", "beta_star") };
            let series_key = if kind == PlotKind::PowerCurve { "n" } else { "d" };
            writeln!(out, "{x},{y},ci_lo,ci_hi,series").expect("writing to a String");
            for r in ok {
                let series = r.params.get(series_key).map_or(String::new(), |s| format!("{series_key}={s}"));
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    get(r, &r.params, x)?,
                    get(r, &r.values, y)?,
                    get(r, &r.values, "ci_lo")?,
                    get(r, &r.values, "ci_hi")?,
                    series
                )
                .expect("writing to a String");
            }
        }
        PlotKind::CycleCheck => {
            writeln!(out, "ell,empirical_mean,predicted_mean,series").expect("writing to a String");
            for r in ok {
                let mut ells: Vec<usize> = r.values.keys().filter_map(|k| k.strip_prefix("mean_")?.parse().ok()).collect();
                if ells.is_empty() {
                    return Err(Error::InvalidArgument(format!("cell {} has no cycle means", r.cell)));
                }
                ells.sort_unstable();
                let series = format!("n={},d={}", get(r, &r.params, "n")?, get(r, &r.params, "d")?);
                for l in ells {
                    writeln!(out, "{l},{},{},{series}", get(r, &r.values, &format!("mean_{l}"))?, get(r, &r.values, &format!("pred_{l}"))?)
                        .expect("writing to a String");
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> (ExperimentConfig, Spec) {
        let c = ExperimentConfig::parse(text).unwrap();
        let s = c.resolve_spec(Path::new(".")).unwrap();
        (c, s)
    }

    #[test]
    fn empty_grid_is_rejected() {
        let c = ExperimentConfig::parse(r#"{"spec":{"k":2,"q":2,"a":5,"b":1},"operation":"cycle-test","grid":{"n":[]}}"#).unwrap();
        assert!(c.validate().is_err());
        let (c, s) = cfg(r#"{"spec":{"k":2,"q":2,"a":5,"b":1},"operation":"cycle-test"}"#);
        assert!(c.cells(&s).is_err());
        assert!(ExperimentConfig::parse(r#"{"spec":{"k":2,"q":2,"a":5,"b":1},"operation":"nope"}"#).is_err());
    }

    #[test]
    fn thresholds_config_is_a_single_report() {
        let (c, s) = cfg(r#"{"spec":{"k":2,"q":2,"a":5,"b":1},"operation":"thresholds"}"#);
        let r = run(&c, &s).unwrap();
        assert_eq!(r.records.len(), 1);
        assert!((r.records[0].values["d_ks"] - 2.25).abs() < 1e-10);
        assert!(r.records[0].report.is_some());
        assert!(emit_plot_data(&r, PlotKind::PowerCurve).is_err());
    }

    #[test]
    fn cycle_check_csv_and_determinism() {
        let (c, s) = cfg(r#"{"spec":{"k":2,"q":2,"a":3,"b":2},"operation":"cycle-check","grid":{"n":[300],"d":[2.0,3.0]},"samples":{"null":40},"kn":4,"seed":3}"#);
        let a = run(&c, &s).unwrap();
        let b = run(&c, &s).unwrap();
        assert_eq!(serde_json::to_string(&a.records).unwrap(), serde_json::to_string(&b.records).unwrap());
        let csv = emit_plot_data(&a, PlotKind::CycleCheck).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "ell,empirical_mean,predicted_mean,series");
        assert_eq!(lines.len(), 1 + 2 * 2);
        assert!(lines[1].starts_with("3,") && lines[1].contains(",1.3333333333333333,"));
    }

    #[test]
    fn failed_cells_are_recorded() {
        // d = 30 makes edge probabilities exceed 1 at n = 10.
        let (c, s) = cfg(r#"{"spec":{"k":2,"q":2,"a":3,"b":2},"operation":"cycle-check","grid":{"n":[10],"d":[1.0,30.0]},"samples":{"null":5},"kn":4}"#);
        let r = run(&c, &s).unwrap();
        assert_eq!(r.failed_cells(), 1);
        assert!(r.records[1].error.is_some() && r.records[0].error.is_none());
    }

    #[test]
    fn write_result_never_overwrites() {
        let (c, s) = cfg(r#"{"spec":{"k":2,"q":2,"a":5,"b":1},"operation":"thresholds"}"#);
        let r = run(&c, &s).unwrap();
        let dir = std::env::temp_dir().join(format!("blocklab-test-{}", std::process::id()));
        let first = write_result(&r, &dir).unwrap();
        let second = write_result(&r, &dir).unwrap();
        assert_ne!(first[0], second[0]);
        fs::remove_dir_all(&dir).unwrap();
    }
}
