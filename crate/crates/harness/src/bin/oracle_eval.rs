//! `oracle-eval`: evaluate a stored controller on a stored operating
//! domain and print a one-line JSON verdict.

use anyhow::{Context, Result};
use clap::Parser;
use std::path::PathBuf;

use safegate_core::env2d::{scenarios_from_csv, PhysicsConfig};
use safegate_core::oracle::{OperatingDomain, Oracle};
use safegate_core::params::ParamVector;

#[derive(Parser)]
#[command(
    name = "oracle-eval",
    about = "Ground-truth safety verdict for a controller on an operating domain"
)]
struct Cli {
    /// Controller binary record (architecture counts + little-endian f64s).
    #[arg(long)]
    params: PathBuf,
    /// Scenario CSV exported by the harness (domain.csv).
    #[arg(long)]
    domain: PathBuf,
    #[arg(long, default_value_t = 200)]
    steps: usize,
    /// Evaluate on the first N scenarios; defaults to min(15, all).
    #[arg(long)]
    trajs: Option<usize>,
    /// Evaluate on every scenario in the file instead of the subset.
    #[arg(long, default_value_t = false)]
    full: bool,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let bytes =
        std::fs::read(&cli.params).with_context(|| format!("reading {}", cli.params.display()))?;
    let theta = ParamVector::read_binary(&mut bytes.as_slice())?;
    let text = std::fs::read_to_string(&cli.domain)
        .with_context(|| format!("reading {}", cli.domain.display()))?;
    let scenarios = scenarios_from_csv(&text)?;
    let trajs = cli.trajs.unwrap_or(15).min(scenarios.len());
    let domain = OperatingDomain::new(scenarios, cli.steps, trajs)?;
    let oracle = Oracle::new(domain, PhysicsConfig::default());
    let verdict = if cli.full {
        oracle.evaluate_full(&theta)?
    } else {
        oracle.evaluate(&theta)?
    };
    println!(
        "{}",
        serde_json::json!({
            "safe": verdict.safe,
            "margin": verdict.margin,
            "score": verdict.score,
        })
    );
    Ok(())
}
