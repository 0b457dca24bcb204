// A JSON-configured grid experiment, written to disk with a tidy CSV.
//
//     cargo run --release --example experiment_grid

use blocklab::error::Result;
use blocklab::experiment::{emit_plot_data, run as run_grid, write_result, ExperimentConfig, PlotKind};
use std::path::Path;

const CONFIG: &str = r#"{
    "spec": {"k": 2, "q": 2, "a": 3, "b": 2},
    "operation": "beta-star",
    "grid": {"d": [1.5, 2.5], "alpha": [0.05, 0.1, 0.2]},
    "samples": {"limit": 20000},
    "seed": 17
}"#;

pub fn run() -> Result<()> {
    let cfg = ExperimentConfig::parse(CONFIG)?;
    let spec = cfg.resolve_spec(Path::new("."))?;
    let result = run_grid(&cfg, &spec)?;
    println!("{} cells, digest {}", result.records.len(), result.config_digest);
    print!("{}", emit_plot_data(&result, PlotKind::BetaStar)?);

    let dir = std::env::temp_dir().join("blocklab-experiment-grid");
    for path in write_result(&result, &dir)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
