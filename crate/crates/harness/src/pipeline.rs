//! Shared experiment plumbing: oracle construction from config overrides,
//! the controller search, and ball building. The acceptance suite reuses
//! these so every criterion runs through the same code path as the CLI.

use anyhow::{Context, Result};

use safegate_core::ball::{construct_ball, Ball};
use safegate_core::env2d::PhysicsConfig;
use safegate_core::lipschitz::{
    estimate_empirical, gronwall_bound, trajectory_sensitivity_bound, EmpiricalOptions,
    LipschitzEstimate, LipschitzMethod,
};
use safegate_core::oracle::{
    search_safe_controller, OperatingDomain, Oracle, DEFAULT_DOMAIN_SEED, DEFAULT_SCENARIOS,
    DEFAULT_SEARCH_CANDIDATES, DEFAULT_STEPS_PER_TRAJ, DEFAULT_TRAJS_PER_EVAL,
};
use safegate_core::params::{LtcArchitecture, ParamVector};
use safegate_core::rng::RngStream;

use crate::config::ExperimentConfig;

/// Environment observation and action widths are fixed by the 2D system.
pub fn arch_for_hidden(n_hid: usize) -> LtcArchitecture {
    LtcArchitecture::new(4, n_hid, 2).expect("valid architecture")
}

/// Oracle from config: `m_scenarios`, `domain_seed`, `steps_per_traj`,
/// `trajs_per_eval` overrides supported.
pub fn build_oracle(cfg: &ExperimentConfig) -> Result<Oracle> {
    let m = cfg.usize_param("m_scenarios", DEFAULT_SCENARIOS)?;
    let domain_seed = cfg.u64_param("domain_seed", DEFAULT_DOMAIN_SEED)?;
    let steps = cfg.usize_param("steps_per_traj", DEFAULT_STEPS_PER_TRAJ)?;
    let trajs = cfg.usize_param("trajs_per_eval", DEFAULT_TRAJS_PER_EVAL)?;
    let domain = OperatingDomain::generate(m, domain_seed, steps, trajs)
        .context("building operating domain")?;
    Ok(Oracle::new(domain, PhysicsConfig::default()))
}

/// Phase-1 search under the run's seed.
pub fn search(
    oracle: &Oracle,
    n_hid: usize,
    candidates: usize,
    seed: u64,
) -> Result<(ParamVector, f64)> {
    let rng = RngStream::new(seed);
    Ok(search_safe_controller(
        oracle,
        arch_for_hidden(n_hid),
        candidates,
        &rng,
    )?)
}

pub fn default_candidates(cfg: &ExperimentConfig) -> Result<usize> {
    cfg.usize_param("candidates", DEFAULT_SEARCH_CANDIDATES)
}

/// The three Lipschitz routes at one controller.
pub struct Bounds {
    pub empirical: LipschitzEstimate,
    pub trajectory: LipschitzEstimate,
    pub gronwall: LipschitzEstimate,
}

pub fn all_bounds(
    theta0: &ParamVector,
    oracle: &Oracle,
    opts: &EmpiricalOptions,
    seed: u64,
) -> Result<Bounds> {
    let rng = RngStream::new(seed).child("lipschitz-empirical");
    let empirical = estimate_empirical(theta0, oracle, opts, &rng)?;
    let trajectory = trajectory_sensitivity_bound(theta0, oracle, None)?;
    let horizon = oracle.domain.steps_per_traj as f64 * oracle.physics.dt;
    let gronwall = gronwall_bound(theta0, horizon)?;
    Ok(Bounds {
        empirical,
        trajectory,
        gronwall,
    })
}

/// Ball from the chosen method's constant.
pub fn build_ball(
    theta0: &ParamVector,
    oracle: &Oracle,
    bounds: &Bounds,
    method: LipschitzMethod,
) -> Result<Ball> {
    let est = match method {
        LipschitzMethod::Empirical => bounds.empirical.clone(),
        LipschitzMethod::Trajectory => bounds.trajectory.clone(),
        LipschitzMethod::Gronwall => bounds.gronwall.clone(),
    };
    Ok(construct_ball(theta0, oracle, est)?)
}
