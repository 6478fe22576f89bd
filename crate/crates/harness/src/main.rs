//! `safegate`: run named experiments, aggregate multi-seed runs, and
//! expose the analytic ceiling kit.

use anyhow::Result;
use clap::{Parser, Subcommand};
use std::path::PathBuf;

use safegate_core::rng::RngStream;
use safegate_core::theory::{
    ceiling, gaussian_renyi, holder_jensen_upper, monte_carlo_ceiling, synthetic_ds_experiment,
    CeilingParams, SyntheticConfig,
};
use safegate_harness::{config::ExperimentConfig, experiments, outputs, run, run_all};

#[derive(Parser)]
#[command(
    name = "safegate",
    about = "Experiment harness for ball-verified self-improvement"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run {
        #[arg(long)]
        experiment: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// key=value config file, one override per line.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Inline override, repeatable: --set key=value
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// Run experiments across seeds and aggregate metrics.
    RunAll {
        /// Comma-separated experiment names; defaults to the positive-result set.
        #[arg(long)]
        experiments: Option<String>,
        #[arg(long, default_value = "42,43,44,45,46")]
        seeds: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// Exact ceiling, Hölder-Jensen bound, and Monte Carlo estimate as JSON.
    Ceiling {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        b: f64,
        #[arg(long)]
        ds: f64,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 50)]
        dimension: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// The variable-separation table as CSV on stdout.
    DsTable {
        #[arg(long, default_value = "0.5,1.0,1.5,2.0")]
        separations: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// List registered experiments.
    List,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            experiment,
            seed,
            out,
            config,
            sets,
        } => {
            let out_dir = out
                .unwrap_or_else(|| PathBuf::from("runs").join(format!("{experiment}-seed{seed}")));
            let mut cfg = ExperimentConfig::new(&experiment, seed, out_dir);
            for s in &sets {
                cfg.parse_set_flag(s)?;
            }
            if let Some(path) = config {
                cfg.load_overrides(&path)?;
            }
            let report = run(&cfg)?;
            print_report(&report);
            if !report.passed {
                std::process::exit(1);
            }
        }
        Command::RunAll {
            experiments: exp,
            seeds,
            out,
            sets,
        } => {
            let names: Vec<String> = match exp {
                Some(list) => list.split(',').map(|s| s.trim().to_string()).collect(),
                None => experiments::POSITIVE_SET
                    .iter()
                    .map(|s| s.to_string())
                    .collect(),
            };
            let seeds: Vec<u64> = seeds
                .split(',')
                .map(|s| s.trim().parse())
                .collect::<std::result::Result<_, _>>()?;
            let out_dir = out.unwrap_or_else(|| PathBuf::from("runs").join("multi-seed"));
            let mut base = ExperimentConfig::new("", 0, out_dir);
            for s in &sets {
                base.parse_set_flag(s)?;
            }
            let reports = run_all(&names, &seeds, &base)?;
            let mut all_ok = true;
            for r in &reports {
                print_report(r);
                all_ok &= r.passed;
            }
            if !all_ok {
                std::process::exit(1);
            }
        }
        Command::Ceiling {
            n,
            b,
            ds,
            trials,
            dimension,
            seed,
        } => {
            let params = CeilingParams::new(n, b, ds)?;
            let exact = ceiling(&params)?;
            let hj: Vec<serde_json::Value> = [1.5, 2.0, 4.0, 8.0]
                .iter()
                .map(|&alpha| -> Result<serde_json::Value> {
                    Ok(serde_json::json!({
                        "alpha": alpha,
                        "bound": holder_jensen_upper(n, b, alpha, gaussian_renyi(alpha, ds))?,
                    }))
                })
                .collect::<Result<_>>()?;
            let mc = monte_carlo_ceiling(&params, dimension, trials, &RngStream::new(seed))?;
            println!(
                "{}",
                serde_json::json!({
                    "horizon": n,
                    "budget": b,
                    "separation": ds,
                    "ceiling": exact,
                    "holder_jensen": hj,
                    "monte_carlo": {"mean": mc.mean, "std_err": mc.std_err, "trials": mc.trials},
                })
            );
        }
        Command::DsTable { separations, seed } => {
            let seps: Vec<f64> = separations
                .split(',')
                .map(|s| s.trim().parse())
                .collect::<std::result::Result<_, _>>()?;
            let synth = SyntheticConfig::default();
            let rng = RngStream::new(seed);
            println!("separation,best_classifier,best_delta,best_tpr,ceiling,ball_utility,gap");
            for ds in seps {
                let r = synthetic_ds_experiment(ds, &synth, &rng.child(&format!("ds-{ds}")))?;
                println!(
                    "{},{},{},{},{},{},{}",
                    ds,
                    r.best_kind.name(),
                    outputs::fmt(r.best_delta),
                    outputs::fmt(r.best_tpr),
                    outputs::fmt(r.ceiling),
                    outputs::fmt(r.ball_utility),
                    outputs::fmt(r.gap)
                );
            }
        }
        Command::List => {
            for name in experiments::names() {
                println!("{name}");
            }
        }
    }
    Ok(())
}

fn print_report(report: &outputs::RunReport) {
    println!(
        "{} seed={} hash={} {} ({:.1}s)",
        report.experiment,
        report.seed,
        report.config_hash,
        if report.passed { "PASS" } else { "FAIL" },
        report.wall_secs
    );
    for f in &report.failures {
        println!("  failed check: {f}");
    }
}
