//! The experiment registry. Each entry reproduces one in-scope result as
//! a seeded run with CSV/JSON/SVG artifacts and embedded assertions.

mod ball;
mod gates;
mod groups;
mod improve;
mod synthetic;

pub use gates::{classifier_grid, GridCell};

use anyhow::{bail, Result};

use crate::config::ExperimentConfig;
use crate::outputs::RunReport;

type Runner = fn(&ExperimentConfig) -> Result<RunReport>;

pub const REGISTRY: [(&str, Runner); 11] = [
    ("s4_1_gates", gates::run_s4_1),
    ("s4_2_baselines", gates::run_s4_2),
    ("s4_3_extended", gates::run_s4_3),
    ("s4_6_variable_ds", synthetic::run_s4_6),
    ("s5_1_ball", ball::run_s5_1),
    ("s5_2_scaling", ball::run_s5_2),
    ("s5_3_directed", improve::run_s5_3),
    ("s5_4_chaining", improve::run_s5_4),
    ("s5_6_architecture_groups", groups::run_s5_6),
    ("s5_8_finite", synthetic::run_s5_8),
    ("ablation", ball::run_ablation),
];

pub fn names() -> Vec<&'static str> {
    REGISTRY.iter().map(|(n, _)| *n).collect()
}

/// The experiments whose headline numbers are aggregated across seeds by
/// `run-all` (the positive verification results).
pub const POSITIVE_SET: [&str; 3] = ["s5_1_ball", "s5_3_directed", "s5_4_chaining"];

pub fn dispatch(cfg: &ExperimentConfig) -> Result<RunReport> {
    for (name, runner) in REGISTRY {
        if name == cfg.experiment {
            return runner(cfg);
        }
    }
    bail!(
        "unknown experiment {:?}; valid names: {}",
        cfg.experiment,
        names().join(", ")
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_experiment_lists_registry() {
        let cfg = ExperimentConfig::new("nope", 1, std::env::temp_dir());
        let err = dispatch(&cfg).unwrap_err().to_string();
        assert!(err.contains("s5_1_ball"));
        assert!(err.contains("ablation"));
    }

    #[test]
    fn registry_names_are_unique() {
        let mut ns = names();
        ns.sort();
        ns.dedup();
        assert_eq!(ns.len(), REGISTRY.len());
    }
}
