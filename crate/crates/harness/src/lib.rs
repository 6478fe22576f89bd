//! Experiment registry and runners: every in-scope result is a named,
//! seeded, configured run that writes `results.csv`, `summary.json`, and
//! simple SVG plots into its output directory. Reruns with the same
//! `(experiment, seed, config)` triple produce byte-identical artifacts;
//! wall-clock timings go to a separate `timing.json`.

pub mod config;
pub mod experiments;
pub mod outputs;
pub mod pipeline;
pub mod svg;

pub use config::ExperimentConfig;
pub use outputs::RunReport;

use anyhow::Result;

/// Run one experiment to completion.
pub fn run(cfg: &ExperimentConfig) -> Result<RunReport> {
    experiments::dispatch(cfg)
}

/// Run experiments across seeds and aggregate the numeric metrics
/// (mean and standard deviation per metric over completed seeds).
pub fn run_all(
    experiment_names: &[String],
    seeds: &[u64],
    base: &ExperimentConfig,
) -> Result<Vec<RunReport>> {
    anyhow::ensure!(!seeds.is_empty(), "run-all needs at least one seed");
    anyhow::ensure!(
        !experiment_names.is_empty(),
        "run-all needs at least one experiment"
    );
    let mut reports = Vec::new();
    for name in experiment_names {
        let mut per_seed = Vec::new();
        for &seed in seeds {
            let mut cfg = base.clone();
            cfg.experiment = name.clone();
            cfg.seed = seed;
            cfg.out_dir = base.out_dir.join(format!("seed-{seed}")).join(name);
            let report = run(&cfg)?;
            per_seed.push(report);
        }
        let aggregate = outputs::aggregate_reports(name, &per_seed)?;
        let agg_path = base.out_dir.join(format!("{name}-aggregate.json"));
        std::fs::create_dir_all(&base.out_dir)?;
        std::fs::write(&agg_path, serde_json::to_string_pretty(&aggregate)?)?;
        reports.extend(per_seed);
    }
    Ok(reports)
}
