//! Compositional verification: per-parameter-group Lipschitz constants,
//! group radii, and the Cauchy-Schwarz composed bound.

use anyhow::Result;

use safegate_core::lipschitz::{
    estimate_empirical, per_group_bounds, EmpiricalOptions, LipschitzMethod,
};
use safegate_core::params::GroupKind;
use safegate_core::rng::RngStream;

use crate::config::ExperimentConfig;
use crate::outputs::{fmt, Recorder, RunReport};
use crate::pipeline;

pub fn run_s5_6(cfg: &ExperimentConfig) -> Result<RunReport> {
    let mut rec = Recorder::new(cfg)?;
    let oracle = pipeline::build_oracle(cfg)?;
    let candidates = pipeline::default_candidates(cfg)?;
    let rng = RngStream::new(cfg.seed);

    let (theta0, margin) =
        pipeline::search(&oracle, cfg.usize_param("n_hid", 12)?, candidates, cfg.seed)?;
    rec.metric("margin", margin);

    let full = estimate_empirical(
        &theta0,
        &oracle,
        &EmpiricalOptions::default(),
        &rng.child("full"),
    )?;
    let per = per_group_bounds(
        &theta0,
        &oracle,
        LipschitzMethod::Empirical,
        &EmpiricalOptions {
            n_random: cfg.usize_param("group_random", 100)?,
            n_axis: cfg.usize_param("group_axis", 20)?,
            ..Default::default()
        },
        &rng.child("groups"),
    )?;

    let factor = full.safety_factor;
    let r_full = margin / (factor * full.l_raw);
    let mut rows = Vec::new();
    for (kind, l) in &per.groups {
        let r_group = margin / (factor * l.max(1e-300));
        rec.metric(&format!("l_{}", kind.name()), *l);
        rec.metric(&format!("r_{}", kind.name()), r_group);
        rows.push(vec![
            kind.name().to_string(),
            fmt(*l),
            fmt(r_group),
            fmt(r_group / r_full),
        ]);
    }
    rows.push(vec!["full".into(), fmt(full.l_raw), fmt(r_full), fmt(1.0)]);
    rows.push(vec![
        "composed".into(),
        fmt(per.composed),
        String::new(),
        String::new(),
    ]);

    let l_tau = per
        .groups
        .iter()
        .find(|(k, _)| *k == GroupKind::Tau)
        .map(|(_, l)| *l)
        .expect("tau group present");
    let ratio = full.l_raw / l_tau.max(1e-300);
    rec.metric("l_full", full.l_raw);
    rec.metric("l_composed", per.composed);
    rec.metric("r_full", r_full);
    rec.metric("r_tau_over_r_full", ratio);
    rec.check(ratio > 5.0, "tau-group radius exceeds 5x the full radius");
    rec.check(
        per.composed >= full.l_raw,
        "composed bound dominates the measured full constant",
    );

    rec.write_csv(
        "results.csv",
        &["group", "l_raw", "radius", "radius_over_full"],
        &rows,
    )?;
    rec.write_timing(&[])?;
    rec.finish()
}
