//! Lipschitz constants for the parameter-to-trajectory map.
//!
//! Three routes of increasing conservatism:
//!
//! - **empirical**: max observed ratio `sup_t |traj(theta0+d) - traj(theta0)| / |d|`
//!   over random and axis-aligned perturbations at several scales,
//!   inflated by a safety factor (default 2.5);
//! - **trajectory sensitivity**: a per-step norm recursion along each
//!   nominal trajectory that upper-bounds the linearized sensitivity of
//!   the coupled (hidden state, position, velocity) dynamics;
//! - **gronwall**: the closed form `|W_out| * exp(|W_rec| * T) * T`.
//!
//! Analytical bounds carry safety factor 1.0; they are already upper
//! bounds, and their radii match the `r = m / L` convention used by the
//! scaling experiments. Per-group variants restrict perturbations (or the
//! parameter-push terms) to one group at a time.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env2d::{rollout, trajectory_distance, Scenario};
use crate::linalg::{norm2, normalize_in_place, spectral_norm, spectral_norm_warm, Matrix};
use crate::oracle::Oracle;
use crate::params::{GroupKind, ParamVector};
use crate::rng::RngStream;
use crate::{Error, Result};

/// The five empirical perturbation scales, log-spaced around the mutation
/// scale of the 2D system.
pub const DEFAULT_SCALES: [f64; 5] = [1e-4, 3e-4, 1e-3, 3e-3, 1e-2];

pub const DEFAULT_SAFETY_FACTOR: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LipschitzMethod {
    Empirical,
    Gronwall,
    Trajectory,
}

impl LipschitzMethod {
    pub fn name(&self) -> &'static str {
        match self {
            LipschitzMethod::Empirical => "empirical",
            LipschitzMethod::Gronwall => "gronwall",
            LipschitzMethod::Trajectory => "trajectory",
        }
    }

    /// Analytical methods are upper bounds already; only the sampled
    /// estimate needs headroom.
    pub fn is_analytical(&self) -> bool {
        !matches!(self, LipschitzMethod::Empirical)
    }
}

/// A Lipschitz constant with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    pub method: LipschitzMethod,
    pub l_raw: f64,
    pub safety_factor: f64,
    pub l_cons: f64,
    pub samples: usize,
    pub scales: Vec<f64>,
}

impl LipschitzEstimate {
    pub fn new(
        method: LipschitzMethod,
        l_raw: f64,
        safety_factor: f64,
        samples: usize,
        scales: Vec<f64>,
    ) -> Self {
        Self {
            method,
            l_raw,
            safety_factor,
            l_cons: safety_factor * l_raw,
            samples,
            scales,
        }
    }
}

/// Options for the sampled estimate. `group` restricts perturbation
/// directions to one parameter group.
#[derive(Debug, Clone)]
pub struct EmpiricalOptions {
    pub n_random: usize,
    pub n_axis: usize,
    pub scales: Vec<f64>,
    pub safety_factor: f64,
    pub group: Option<GroupKind>,
}

impl Default for EmpiricalOptions {
    fn default() -> Self {
        Self {
            n_random: 250,
            n_axis: 50,
            scales: DEFAULT_SCALES.to_vec(),
            safety_factor: DEFAULT_SAFETY_FACTOR,
            group: None,
        }
    }
}

/// Unit perturbation direction, random Gaussian or axis-aligned, restricted
/// to `group` when given.
fn perturbation_direction(
    theta0: &ParamVector,
    axis_aligned: bool,
    group: Option<GroupKind>,
    rng: &mut RngStream,
) -> Option<Vec<f64>> {
    let d = theta0.dimension();
    let range = match group {
        Some(kind) => theta0.arch.group(kind).range(),
        None => 0..d,
    };
    let mut dir = vec![0.0; d];
    if axis_aligned {
        let j = range.start + rng.index(range.len());
        dir[j] = 1.0;
    } else {
        for v in &mut dir[range] {
            *v = rng.normal();
        }
        if normalize_in_place(&mut dir) == 0.0 {
            return None;
        }
    }
    Some(dir)
}

/// Max observed trajectory-distance ratio over perturbation samples.
pub fn estimate_empirical(
    theta0: &ParamVector,
    oracle: &Oracle,
    opts: &EmpiricalOptions,
    rng: &RngStream,
) -> Result<LipschitzEstimate> {
    let nominal = oracle.eval_trajectories(theta0)?;
    let total = opts.n_random + opts.n_axis;
    if total == 0 {
        return Err(Error::InvalidArgument(
            "empirical estimate needs at least one sample".into(),
        ));
    }
    let ratios: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut child = rng.child_indexed("lipschitz-sample", i as u64);
            let axis = i >= opts.n_random;
            let Some(dir) = perturbation_direction(theta0, axis, opts.group, &mut child) else {
                return Ok(0.0); // zero-norm direction: skip
            };
            let scale = opts.scales[i % opts.scales.len()];
            let mut perturbed = theta0.clone();
            for (v, dv) in perturbed.values.iter_mut().zip(&dir) {
                *v += scale * dv;
            }
            let mut worst = 0.0f64;
            for (s, base) in oracle.domain.eval_scenarios().iter().zip(&nominal) {
                let tr = rollout(&perturbed, s, oracle.domain.steps_per_traj, &oracle.physics)?;
                worst = worst.max(trajectory_distance(base, &tr)?);
            }
            Ok(worst / scale)
        })
        .collect::<Result<Vec<_>>>()?;
    let l_raw = ratios.into_iter().fold(0.0, f64::max);
    Ok(LipschitzEstimate::new(
        LipschitzMethod::Empirical,
        l_raw,
        opts.safety_factor,
        total,
        opts.scales.clone(),
    ))
}

/// Gronwall envelope: `L = |W_out|_2 * exp(|W_rec|_2 * T) * T` with
/// spectral norms from power iteration.
pub fn gronwall_bound(theta0: &ParamVector, horizon_secs: f64) -> Result<LipschitzEstimate> {
    if horizon_secs <= 0.0 {
        return Err(Error::InvalidArgument("horizon must be positive".into()));
    }
    let groups = theta0.unpack();
    let w_out = spectral_norm(&groups.w_out, 100, 1e-9);
    let w_rec = spectral_norm(&groups.w_rec, 100, 1e-9);
    let l = w_out * (w_rec * horizon_secs).exp() * horizon_secs;
    Ok(LipschitzEstimate::new(
        LipschitzMethod::Gronwall,
        l,
        1.0,
        0,
        Vec::new(),
    ))
}

/// Scalar norm recursion `s <- g * s + e`, returning the running maximum.
/// With unit gains and zero pushes the bound stays at zero.
pub fn sensitivity_recursion(step_gains: &[f64], step_pushes: &[f64]) -> f64 {
    debug_assert_eq!(step_gains.len(), step_pushes.len());
    let mut s = 0.0f64;
    let mut max_s = 0.0f64;
    for (&g, &e) in step_gains.iter().zip(step_pushes) {
        s = g * s + e;
        max_s = max_s.max(s);
    }
    max_s
}

/// Trajectory-specific sensitivity bound.
///
/// Walks each nominal trajectory and accumulates, per Euler step, the exact
/// spectral norm of the one-step state Jacobian (gain `g_k`) and an upper
/// bound on the one-step parameter Jacobian norm (push `e_k`), then runs
/// the scalar recursion. The result upper-bounds the linearized
/// parameter-to-position sensitivity `sup_t |d pos(t) / d theta|`.
pub fn trajectory_sensitivity_bound(
    theta0: &ParamVector,
    oracle: &Oracle,
    group: Option<GroupKind>,
) -> Result<LipschitzEstimate> {
    let mut worst = 0.0f64;
    for scenario in oracle.domain.eval_scenarios() {
        let b = sensitivity_walk(
            theta0,
            scenario,
            oracle.domain.steps_per_traj,
            &oracle.physics,
            group,
            None,
        )?;
        worst = worst.max(b);
    }
    Ok(LipschitzEstimate::new(
        LipschitzMethod::Trajectory,
        worst,
        1.0,
        0,
        Vec::new(),
    ))
}

/// Mirror of [`rollout`] that also assembles the per-step Jacobian data.
/// `check_positions`, when set, collects the walked positions so tests can
/// assert bit-identity with the plain rollout.
fn sensitivity_walk(
    theta: &ParamVector,
    scenario: &Scenario,
    steps: usize,
    cfg: &crate::env2d::PhysicsConfig,
    group: Option<GroupKind>,
    mut check_positions: Option<&mut Vec<crate::env2d::Vec2>>,
) -> Result<f64> {
    use crate::env2d::{ENV_N_ACT, ENV_N_OBS};

    if steps == 0 {
        return Err(Error::InvalidArgument("rollout needs steps >= 1".into()));
    }
    theta.validate()?;
    let n = theta.arch.n_hid;
    let dim = n + 4;
    let w_in = theta.group_slice(GroupKind::WIn);
    let w_rec = theta.group_slice(GroupKind::WRec);
    let bias = theta.group_slice(GroupKind::Bias);
    let w_out = theta.group_slice(GroupKind::WOut);
    let tau = theta.group_slice(GroupKind::Tau);

    let dt = cfg.dt;
    let m = cfg.mass;
    let damp_keep = 1.0 - dt * cfg.damping / m;
    let chain_amp = (1.0 + dt * dt).sqrt();

    let mut x = vec![0.0f64; n];
    let mut pos = scenario.start;
    let launch = scenario.launch_direction();
    let mut vel = crate::env2d::Vec2::new(
        crate::env2d::LAUNCH_SPEED * launch.x,
        crate::env2d::LAUNCH_SPEED * launch.y,
    );
    if let Some(ps) = check_positions.as_deref_mut() {
        ps.push(pos);
    }

    let mut d1 = vec![0.0f64; n];
    let mut tanh_x = vec![0.0f64; n];
    let mut jac = Matrix::zeros(dim, dim);
    let mut warm: Vec<f64> = Vec::new();

    let mut s = 0.0f64;
    let mut max_s = 0.0f64;

    for step in 0..steps {
        let obs = [
            (scenario.target.x - pos.x) / 10.0,
            (scenario.target.y - pos.y) / 10.0,
            vel.x / 5.0,
            vel.y / 5.0,
        ];
        let x_before = x.clone();
        for i in 0..n {
            let mut pre = bias[i];
            for (w, o) in w_in[i * ENV_N_OBS..(i + 1) * ENV_N_OBS].iter().zip(&obs) {
                pre += w * o;
            }
            for (w, xv) in w_rec[i * n..(i + 1) * n].iter().zip(&x) {
                pre += w * xv;
            }
            let t = pre.tanh();
            d1[i] = 1.0 - t * t;
            x[i] += dt * (-x[i] / tau[i] + t);
        }
        for i in 0..n {
            tanh_x[i] = x[i].tanh();
        }
        let mut u = [0.0f64; ENV_N_ACT];
        let mut clipped = false;
        for (a, ua) in u.iter_mut().enumerate() {
            let mut sum = 0.0;
            for (w, t) in w_out[a * n..(a + 1) * n].iter().zip(&tanh_x) {
                sum += w * t;
            }
            if sum.abs() > cfg.max_force {
                clipped = true;
            }
            *ua = sum.clamp(-cfg.max_force, cfg.max_force);
        }
        vel.x += dt * (u[0] - cfg.damping * vel.x) / m;
        vel.y += dt * (u[1] - cfg.damping * vel.y) / m;
        pos.x += dt * vel.x;
        pos.y += dt * vel.y;
        if let Some(ps) = check_positions.as_deref_mut() {
            ps.push(pos);
        }

        // One-step state Jacobian, state order (x, px, py, vx, vy).
        //
        // X rows: dx'/dx = I - dt*diag(1/tau) + dt*D1*W_rec;
        //         dx'/dpos = -dt/10 * D1 * W_in[:, :2];
        //         dx'/dvel =  dt/5  * D1 * W_in[:, 2:].
        jac.data.fill(0.0);
        for i in 0..n {
            let row = &mut jac.data[i * dim..(i + 1) * dim];
            for (j, r) in row.iter_mut().take(n).enumerate() {
                *r = dt * d1[i] * w_rec[i * n + j];
            }
            row[i] += 1.0 - dt / tau[i];
            row[n] = -dt / 10.0 * d1[i] * w_in[i * ENV_N_OBS];
            row[n + 1] = -dt / 10.0 * d1[i] * w_in[i * ENV_N_OBS + 1];
            row[n + 2] = dt / 5.0 * d1[i] * w_in[i * ENV_N_OBS + 2];
            row[n + 3] = dt / 5.0 * d1[i] * w_in[i * ENV_N_OBS + 3];
        }
        // Output path: M = W_out * diag(1 - tanh(x')^2), a 2 x n map whose
        // exact spectral norm comes from its 2x2 Gram matrix.
        let mut m_out = [vec![0.0; n], vec![0.0; n]];
        for a in 0..ENV_N_ACT {
            for i in 0..n {
                let d2 = 1.0 - tanh_x[i] * tanh_x[i];
                m_out[a][i] = w_out[a * n + i] * d2;
            }
        }
        let sigma_mout = two_row_spectral_norm(&m_out[0], &m_out[1]);
        // V rows = (dt/m) * M * X + damp_keep * selector(vel);
        // P rows = selector(pos) + dt * V.
        for a in 0..ENV_N_ACT {
            for col in 0..dim {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += m_out[a][i] * jac.data[i * dim + col];
                }
                let v_entry = dt / m * acc + if col == n + 2 + a { damp_keep } else { 0.0 };
                jac.data[(n + 2 + a) * dim + col] = v_entry;
                jac.data[(n + a) * dim + col] = dt * v_entry + if col == n + a { 1.0 } else { 0.0 };
            }
        }

        let mut g = spectral_norm_warm(&jac, 200, 1e-10, Some(&mut warm)) * (1.0 + 1e-9);
        if clipped {
            // Clamp zeroes rows of the output path; bound the difference by
            // (dt/m) * |M| * |X-rows| * sqrt(1 + dt^2), with |X-rows| <= g.
            g += dt / m * sigma_mout * g * chain_amp;
        }

        // Parameter push per unit ||d theta||, chained through the same step.
        let dmax = d1.iter().cloned().fold(0.0, f64::max);
        let obs_norm = norm2(&obs);
        let x_norm = norm2(&x_before);
        let tau_push = x_before
            .iter()
            .zip(tau)
            .map(|(xv, tv)| (xv / (tv * tv)).abs())
            .fold(0.0, f64::max);
        let tanh_norm = norm2(&tanh_x);
        let groups_push: [(GroupKind, f64); 5] = [
            (GroupKind::WIn, dt * dmax * obs_norm),
            (GroupKind::WRec, dt * dmax * x_norm),
            (GroupKind::Bias, dt * dmax),
            (GroupKind::WOut, 0.0),
            (GroupKind::Tau, dt * tau_push),
        ];
        let mut e_sq = 0.0;
        for (kind, a_g) in groups_push {
            if group.is_some() && group != Some(kind) {
                continue;
            }
            let chained = dt / m * sigma_mout * a_g;
            e_sq += a_g * a_g + chained * chained * (1.0 + dt * dt);
        }
        if group.is_none() || group == Some(GroupKind::WOut) {
            let direct = dt / m * tanh_norm;
            e_sq += direct * direct * (1.0 + dt * dt);
        }
        let e = e_sq.sqrt();

        if !(g.is_finite() && e.is_finite()) {
            return Err(Error::NonFiniteJacobian { step });
        }
        s = g * s + e;
        max_s = max_s.max(s);
    }
    Ok(max_s)
}

/// Exact largest singular value of a 2-row matrix via its 2x2 Gram matrix.
fn two_row_spectral_norm(r0: &[f64], r1: &[f64]) -> f64 {
    let g00 = crate::linalg::dot(r0, r0);
    let g01 = crate::linalg::dot(r0, r1);
    let g11 = crate::linalg::dot(r1, r1);
    let tr = g00 + g11;
    let det = g00 * g11 - g01 * g01;
    let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
    ((tr + disc) / 2.0).max(0.0).sqrt()
}

/// Per-group constants and their Cauchy-Schwarz composition
/// `sqrt(sum L_k^2)`. Values are raw (no safety factor); consumers apply
/// the factor when turning constants into radii.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupLipschitz {
    pub method: LipschitzMethod,
    pub groups: Vec<(GroupKind, f64)>,
    pub composed: f64,
}

pub fn compose_group_bound(per_group: &[f64]) -> f64 {
    per_group.iter().map(|l| l * l).sum::<f64>().sqrt()
}

/// Compute one Lipschitz constant per parameter group.
///
/// Empirical: perturbations restricted to the group. Trajectory: the
/// recursion keeps only that group's parameter-push term. Gronwall: the
/// same exponential envelope with a per-group input gain measured along
/// the nominal trajectories.
pub fn per_group_bounds(
    theta0: &ParamVector,
    oracle: &Oracle,
    method: LipschitzMethod,
    opts: &EmpiricalOptions,
    rng: &RngStream,
) -> Result<GroupLipschitz> {
    let mut groups = Vec::with_capacity(5);
    match method {
        LipschitzMethod::Empirical => {
            for kind in GroupKind::ALL {
                let mut o = opts.clone();
                o.group = Some(kind);
                let est = estimate_empirical(theta0, oracle, &o, &rng.child(kind.name()))?;
                groups.push((kind, est.l_raw));
            }
        }
        LipschitzMethod::Trajectory => {
            for kind in GroupKind::ALL {
                let est = trajectory_sensitivity_bound(theta0, oracle, Some(kind))?;
                groups.push((kind, est.l_raw));
            }
        }
        LipschitzMethod::Gronwall => {
            let horizon = oracle.domain.steps_per_traj as f64 * oracle.physics.dt;
            let gains = gronwall_group_gains(theta0, oracle)?;
            let unpacked = theta0.unpack();
            let w_out = spectral_norm(&unpacked.w_out, 100, 1e-9);
            let w_rec = spectral_norm(&unpacked.w_rec, 100, 1e-9);
            let envelope = (w_rec * horizon).exp() * horizon;
            for kind in GroupKind::ALL {
                let l = match kind {
                    GroupKind::WOut => gains.tanh_norm * horizon,
                    GroupKind::WIn => gains.obs_norm * w_out * envelope,
                    GroupKind::WRec => gains.x_norm * w_out * envelope,
                    GroupKind::Bias => w_out * envelope,
                    GroupKind::Tau => gains.tau_push * w_out * envelope,
                };
                groups.push((kind, l));
            }
        }
    }
    let composed = compose_group_bound(&groups.iter().map(|(_, l)| *l).collect::<Vec<_>>());
    Ok(GroupLipschitz {
        method,
        groups,
        composed,
    })
}

struct GronwallGains {
    obs_norm: f64,
    x_norm: f64,
    tau_push: f64,
    tanh_norm: f64,
}

/// Worst-case input magnitudes along the nominal trajectories, used as
/// per-group gains for the Gronwall envelope.
fn gronwall_group_gains(theta0: &ParamVector, oracle: &Oracle) -> Result<GronwallGains> {
    use crate::env2d::ENV_N_OBS;
    let n = theta0.arch.n_hid;
    let w_in = theta0.group_slice(GroupKind::WIn);
    let w_rec = theta0.group_slice(GroupKind::WRec);
    let bias = theta0.group_slice(GroupKind::Bias);
    let tau = theta0.group_slice(GroupKind::Tau);
    let cfg = oracle.physics;

    let mut gains = GronwallGains {
        obs_norm: 0.0,
        x_norm: 0.0,
        tau_push: 0.0,
        tanh_norm: 0.0,
    };
    for scenario in oracle.domain.eval_scenarios() {
        let tr = rollout(theta0, scenario, oracle.domain.steps_per_traj, &cfg)?;
        let mut x = vec![0.0f64; n];
        let launch = scenario.launch_direction();
        let mut vel = crate::env2d::Vec2::new(
            crate::env2d::LAUNCH_SPEED * launch.x,
            crate::env2d::LAUNCH_SPEED * launch.y,
        );
        for (step, pos) in tr.positions.iter().take(tr.positions.len() - 1).enumerate() {
            let obs = [
                (scenario.target.x - pos.x) / 10.0,
                (scenario.target.y - pos.y) / 10.0,
                vel.x / 5.0,
                vel.y / 5.0,
            ];
            gains.obs_norm = gains.obs_norm.max(norm2(&obs));
            gains.x_norm = gains.x_norm.max(norm2(&x));
            for i in 0..n {
                gains.tau_push = gains.tau_push.max((x[i] / (tau[i] * tau[i])).abs());
            }
            for i in 0..n {
                let mut pre = bias[i];
                for (w, o) in w_in[i * ENV_N_OBS..(i + 1) * ENV_N_OBS].iter().zip(&obs) {
                    pre += w * o;
                }
                for (w, xv) in w_rec[i * n..(i + 1) * n].iter().zip(&x) {
                    pre += w * xv;
                }
                x[i] += cfg.dt * (-x[i] / tau[i] + pre.tanh());
            }
            let tanh_norm = x.iter().map(|v| v.tanh() * v.tanh()).sum::<f64>().sqrt();
            gains.tanh_norm = gains.tanh_norm.max(tanh_norm);
            // Velocity replay from the recorded positions.
            let next = tr.positions[step + 1];
            vel.x = (next.x - pos.x) / cfg.dt;
            vel.y = (next.y - pos.y) / cfg.dt;
        }
    }
    Ok(gains)
}
