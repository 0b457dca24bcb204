//! The `blocklab` command line. JSON goes to stdout unless `--out` is given.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 bad input or config,
//! 3 when a `run` finished but some grid cells failed.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::cycles::count_hyper_cycles;
use crate::error::{Error, Result};
use crate::experiment::{emit_plot_data, run, thresholds_report, write_result, ExperimentConfig, ExperimentResult, PlotKind};
use crate::harness::{default_kn, power_experiment, probe_grid, weak_recovery_probe, Samples};
use crate::io::{graph_to_string, read_graph, read_spec, AssignmentDocument, Spec};
use crate::limit_law::{optimal_power, CycleTerms};
use crate::model::{FactorGraph, HsbmSpec};
use crate::oracle::{exact_log_likelihood, exact_posterior, free_energy_derivative_functional, mutual_information_terms, posterior_overlap_expectation, two_point, DEFAULT_BUDGET};
use crate::rng::Seed;
use crate::samplers::{batch, condition_simple, gamma_resample, sample_hsbm, sample_poisson_model, Law};
use crate::spectral::DEFAULT_L_MAX;

pub const WORKERS_ENV: &str = "BLOCKLAB_WORKERS";
const REJECTION_BUDGET: usize = 100_000;

#[derive(Debug, Parser)]
#[command(name = "blocklab", version, about = "Block models, cycle tests and exact small-n oracles")]
pub struct Cli {
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; falls back to $BLOCKLAB_WORKERS, then all cores.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output file (or directory for `sample` and `run`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModelKind {
    Factor,
    Hsbm,
    Er,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum OracleOp {
    Likelihood,
    Posterior,
    TwoPoint,
    Overlap,
    Mi,
    Dfe,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum EmitKind {
    PowerCurve,
    BetaStar,
    CycleCheck,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw graphs (text format) with a sidecar JSON holding the planted assignment.
    Sample {
        #[arg(long, value_enum, default_value = "factor")]
        model: ModelKind,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: Option<f64>,
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Arity and colors for `--model er` without a spec.
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 2)]
        q: usize,
        #[arg(long, default_value_t = 1)]
        count: usize,
        /// Condition on the simple-graph event by rejection.
        #[arg(long)]
        simple: bool,
        /// Replace each clause by a null clause with this probability.
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Spectral report: d_KS, eigenvalues, cycle weights, (SYM) and (MIN).
    Thresholds {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = DEFAULT_L_MAX)]
        l_max: usize,
        #[arg(long, default_value_t = 16)]
        starts: usize,
    },
    /// Cycle counts X_ℓ of a simple graph.
    Cycles {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 6)]
        kmax: usize,
    },
    /// Optimal power β*(α) of the limiting likelihood-ratio test.
    Power {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 1e6)]
        samples: f64,
        #[arg(long, default_value_t = DEFAULT_L_MAX)]
        l_max: usize,
    },
    /// Size and power of the cycle-count test on sampled graphs.
    CycleTest {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Null and planted evaluation graphs each.
        #[arg(long, default_value_t = 400)]
        samples: usize,
        /// Calibration graphs; defaults to max(1000, 50/α).
        #[arg(long)]
        calibration: Option<usize>,
        #[arg(long)]
        kn: Option<usize>,
        #[arg(long)]
        randomized: bool,
    },
    /// Exact enumeration over all qⁿ assignments.
    Oracle {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long, value_enum)]
        op: OracleOp,
        #[arg(long, default_value_t = 0)]
        u: usize,
        #[arg(long, default_value_t = 1)]
        v: usize,
        /// Graph size and sample count for `--op mi`.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Weak-recovery diagnostics on small planted instances.
    EquivProbe {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 12)]
        n: usize,
        /// Comma-separated degrees; defaults to the model's d.
        #[arg(long, value_delimiter = ',')]
        d: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Execute a JSON experiment config over its grid.
    Run { config: PathBuf },
    /// Turn a result file into tidy CSV.
    Emit {
        result: PathBuf,
        #[arg(long, value_enum)]
        kind: EmitKind,
    },
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidModel(_) | Error::InvalidArgument(_) | Error::Parse(_) | Error::Io(_) | Error::Json(_) => 2,
        _ => 1,
    }
}

/// Resolves the worker count: flag, then `$BLOCKLAB_WORKERS`, then rayon's default.
pub fn workers(flag: Option<usize>) -> Option<usize> {
    flag.or_else(|| std::env::var(WORKERS_ENV).ok()?.parse().ok()).filter(|&w| w > 0)
}

pub fn main() -> i32 {
    run_cli(Cli::parse())
}

pub fn run_cli(cli: Cli) -> i32 {
    let pool = match workers(cli.workers) {
        Some(w) => rayon::ThreadPoolBuilder::new().num_threads(w).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn write_out(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, text)?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}")?;
        }
    }
    Ok(())
}

fn emit_json(out: Option<&Path>, value: &impl Serialize) -> Result<i32> {
    write_out(out, &serde_json::to_string_pretty(value)?)?;
    Ok(0)
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let seed = Seed::new(cli.seed);
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Sample { model, n, d, spec, k, q, count, simple, gamma } => {
            let spec = spec.as_deref().map(read_spec).transpose()?;
            let spec = match (spec, d) {
                (Some(s), Some(d)) => Some(s.with_d(*d)?),
                (s, _) => s,
            };
            sample_cmd(*model, *n, *d, spec.as_ref(), (*k, *q), *count, *simple, *gamma, seed, out)
        }
        Command::Thresholds { spec, l_max, starts } => emit_json(out, &thresholds_report(&read_spec(spec)?, *l_max, *starts, seed)?),
        Command::Cycles { graph, kmax } => {
            // Files carry no simple flag; verify on load.
            let census = count_hyper_cycles(&read_graph(graph)?.into_simple()?, *kmax)?;
            emit_json(out, &json!({ "counts": census.counts }))
        }
        Command::Power { spec, alpha, samples, l_max } => {
            let spec = read_spec(spec)?;
            let terms = CycleTerms::hsbm(spec.hsbm()?, *l_max)?;
            emit_json(out, &optimal_power(&terms, *alpha, *samples as usize, seed)?)
        }
        Command::CycleTest { spec, n, alpha, samples, calibration, kn, randomized } => {
            let spec = read_spec(spec)?;
            let calibration = calibration.unwrap_or_else(|| 1000.max((50.0 / alpha).ceil() as usize));
            let budget = Samples { calibration, null: *samples, planted: *samples, limit: 200_000 };
            let kn = kn.unwrap_or_else(|| default_kn(*n));
            emit_json(out, &power_experiment(spec.hsbm()?, *n, *alpha, kn, budget, *randomized, seed)?)
        }
        Command::Oracle { spec, graph, op, u, v, n, samples } => {
            let spec = read_spec(spec)?.factor()?;
            let graph = graph.as_deref().map(read_graph).transpose()?;
            let need_graph = || graph.as_ref().ok_or_else(|| Error::InvalidArgument("--graph is required for this op".into()));
            match op {
                OracleOp::Likelihood => {
                    let ln = exact_log_likelihood(&spec, need_graph()?, DEFAULT_BUDGET)?;
                    emit_json(out, &json!({ "log_likelihood": ln, "likelihood": ln.exp() }))
                }
                OracleOp::Posterior => {
                    let g = need_graph()?;
                    let table = exact_posterior(&spec, g)?;
                    let marginals: Vec<Vec<f64>> = (0..g.n).map(|u| table.marginal(u)).collect();
                    emit_json(out, &json!({ "log_likelihood": table.log_likelihood, "total_mass": table.total_mass(), "marginals": marginals }))
                }
                OracleOp::TwoPoint => {
                    let m = two_point(&spec, need_graph()?, *u, *v)?;
                    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
                    emit_json(out, &json!({ "u": u, "v": v, "matrix": rows }))
                }
                OracleOp::Overlap => emit_json(out, &posterior_overlap_expectation(&spec, need_graph()?, seed)?),
                OracleOp::Mi => {
                    let n = n.or(graph.as_ref().map(|g| g.n)).ok_or_else(|| Error::InvalidArgument("--op mi needs --n or --graph".into()))?;
                    emit_json(out, &mutual_information_terms(&spec, n, *samples, seed)?)
                }
                OracleOp::Dfe => emit_json(out, &json!({ "value": free_energy_derivative_functional(&spec, need_graph()?)? })),
            }
        }
        Command::EquivProbe { spec, n, d, samples } => {
            let spec = read_spec(spec)?.factor()?;
            if d.is_empty() {
                emit_json(out, &weak_recovery_probe(&spec, *n, *samples, seed)?)
            } else {
                emit_json(out, &probe_grid(&spec, d, *n, *samples, seed)?)
            }
        }
        Command::Run { config } => {
            let (mut cfg, spec) = ExperimentConfig::load(config)?;
            if cfg.seed == 0 && cli.seed != 0 {
                cfg.seed = cli.seed;
            }
            let result = run(&cfg, &spec)?;
            let dir = out.map(Path::to_path_buf).or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("results"));
            for path in write_result(&result, &dir)? {
                eprintln!("wrote {}", path.display());
            }
            let failed = result.failed_cells();
            if failed > 0 {
                for r in result.records.iter().filter(|r| r.error.is_some()) {
                    eprintln!("cell {} failed: {}", r.cell, r.error.as_deref().unwrap_or(""));
                }
                return Ok(3);
            }
            Ok(0)
        }
        Command::Emit { result, kind } => {
            let result: ExperimentResult = serde_json::from_str(&fs::read_to_string(result)?)?;
            let kind = match kind {
                EmitKind::PowerCurve => PlotKind::PowerCurve,
                EmitKind::BetaStar => PlotKind::BetaStar,
                EmitKind::CycleCheck => PlotKind::CycleCheck,
            };
            write_out(out, emit_plot_data(&result, kind)?.trim_end())?;
            Ok(0)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn sample_cmd(
    model: ModelKind,
    n: usize,
    d: Option<f64>,
    spec: Option<&Spec>,
    (k, q): (usize, usize),
    count: usize,
    simple: bool,
    gamma: Option<f64>,
    seed: Seed,
    out: Option<&Path>,
) -> Result<i32> {
    let missing = || Error::InvalidArgument("--spec is required for this model".into());
    let draws: Vec<Result<(crate::model::CommunityAssignment, FactorGraph)>> = match model {
        ModelKind::Factor => {
            let f = spec.ok_or_else(missing)?.factor()?;
            batch(count, seed, |s| {
                if simple {
                    condition_simple(&f, n, Law::Planted, s, REJECTION_BUDGET).map(|c| (c.sigma, c.graph))
                } else {
                    Ok(sample_poisson_model(&f, n, Law::Planted, s))
                }
            })
        }
        ModelKind::Hsbm => {
            let h = spec.ok_or_else(missing)?.hsbm()?.clone();
            batch(count, seed, |s| sample_hsbm(&h, n, s))
        }
        ModelKind::Er => {
            let (k, q) = spec.map_or((k, q), |s| (s.k(), s.q()));
            let d = d.or(spec.map(Spec::d)).ok_or_else(|| Error::InvalidArgument("--model er needs --d or --spec".into()))?;
            let h = HsbmSpec::erdos_renyi(k, q, d)?;
            batch(count, seed, |s| sample_hsbm(&h, n, s))
        }
    };
    let factor = match gamma {
        Some(_) => Some(spec.ok_or_else(missing)?.factor()?),
        None => None,
    };
    for (i, draw) in draws.into_iter().enumerate() {
        let (sigma, mut g) = draw?;
        if let (Some(gamma), Some(f)) = (gamma, factor.as_ref()) {
            g = gamma_resample(&g, f, gamma, seed.child(i as u64).fork("gamma"))?.0;
        }
        let sidecar = serde_json::to_string_pretty(&AssignmentDocument::from(&sigma))?;
        match out {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                fs::write(dir.join(format!("graph-{i}.txt")), graph_to_string(&g))?;
                fs::write(dir.join(format!("graph-{i}.sigma.json")), sidecar)?;
            }
            None => {
                write!(std::io::stdout().lock(), "{}", graph_to_string(&g))?;
                eprintln!("{sidecar}");
            }
        }
    }
    Ok(0)
}
