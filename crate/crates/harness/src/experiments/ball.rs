//! Ball-verifier experiments: the five-phase construction, the scaling
//! sweep over hidden widths, and the domain-size x safety-factor ablation
//! grid.

use anyhow::Result;
use rayon::prelude::*;

use safegate_core::ball::{
    calibrate_loop_sigma, calibrate_sigma_star, construct_ball, gated_loop, soundness_audit,
};
use safegate_core::env2d::{scenarios_to_csv, PhysicsConfig};
use safegate_core::gates::DEFAULT_WINDOW;
use safegate_core::lipschitz::{estimate_empirical, EmpiricalOptions, LipschitzMethod};
use safegate_core::oracle::{oracle_cost_probe, OperatingDomain, Oracle};
use safegate_core::params::gaussian_mutation;
use safegate_core::rng::RngStream;
use safegate_core::theory::fit_decay_exponent;

use crate::config::ExperimentConfig;
use crate::outputs::{fmt, Recorder, RunReport};
use crate::pipeline;
use crate::svg::{Chart, Series};

/// The five-phase ball construction on the 2D system: controller search,
/// Lipschitz estimation, radius, soundness audit, and the ball-gated
/// self-improvement loop. Also measures the mutation base rate and the
/// gate-versus-oracle cost.
pub fn run_s5_1(cfg: &ExperimentConfig) -> Result<RunReport> {
    let mut rec = Recorder::new(cfg)?;
    let oracle = pipeline::build_oracle(cfg)?;
    let rng = RngStream::new(cfg.seed);

    // The operating domain is a reviewable artifact.
    rec.write_text("domain.csv", &scenarios_to_csv(&oracle.domain.scenarios))?;

    // Phase 1: search.
    let candidates = pipeline::default_candidates(cfg)?;
    let (theta0, margin) =
        pipeline::search(&oracle, cfg.usize_param("n_hid", 12)?, candidates, cfg.seed)?;
    rec.metric("margin", margin);
    rec.check(margin > 0.0, "phase 1 found a positive-margin controller");
    let mut theta_bytes = Vec::new();
    theta0.write_binary(&mut theta_bytes)?;
    std::fs::write(rec.out_path("theta0.bin"), &theta_bytes)?;
    rec.write_text("theta0.csv", &theta0.to_csv())?;
    rec.write_json(
        "theta0.json",
        &serde_json::json!({
            "seed": cfg.seed,
            "candidates": candidates,
            "margin": margin,
            "arch": theta0.arch,
        }),
    )?;

    // Phase 2: empirical Lipschitz constant.
    let opts = EmpiricalOptions {
        n_random: cfg.usize_param("lipschitz_random", 250)?,
        n_axis: cfg.usize_param("lipschitz_axis", 50)?,
        ..Default::default()
    };
    let est = estimate_empirical(&theta0, &oracle, &opts, &rng.child("lipschitz"))?;
    rec.metric("l_raw", est.l_raw);
    rec.metric("l_cons", est.l_cons);

    // Phase 3: radius.
    let ball = construct_ball(&theta0, &oracle, est)?;
    rec.metric("r", ball.radius);
    ball.save(&cfg.out_dir, "ball")?;

    // Phase 4: soundness audit.
    let n_inside = cfg.usize_param("audit_inside", 200)?;
    let n_outside = cfg.usize_param("audit_outside", 100)?;
    let audit = soundness_audit(&ball, &oracle, n_inside, n_outside, &rng.child("audit"))?;
    rec.metric("inside_unsafe", audit.inside_unsafe as f64);
    rec.metric("outside_safe", audit.outside_safe as f64);
    rec.metric("mean_radial_fraction", audit.mean_radial_fraction);
    rec.check(
        audit.inside_unsafe == 0,
        "phase 4: zero unsafe in-ball samples",
    );

    // Phase 5: ball-gated loop at the loop-calibrated mutation scale.
    let steps = cfg.usize_param("loop_steps", 500)?;
    let sigma_star = calibrate_sigma_star(&ball, 200, &rng.child("sigma-star"));
    let sigma_loop = calibrate_loop_sigma(&ball, steps, 0.92, &rng.child("sigma-loop"));
    rec.metric("sigma_star", sigma_star);
    rec.metric("sigma_loop", sigma_loop);
    let mut loop_rng = rng.child("gated-loop");
    let trace = gated_loop(
        &ball,
        &oracle,
        sigma_loop,
        steps,
        DEFAULT_WINDOW,
        &mut loop_rng,
    )?;
    rec.metric("loop_acceptance", trace.acceptance_rate());
    rec.metric("loop_delta", trace.sum_false_accepts as f64);
    rec.metric("loop_sum_tpr", trace.sum_true_accepts as f64);
    rec.check(trace.sum_false_accepts == 0, "phase 5: zero false accepts");
    rec.check(
        trace.acceptance_rate() >= 0.9,
        "phase 5: acceptance at least 90%",
    );
    rec.write_text("loop_trace.csv", &trace.to_csv())?;
    rec.write_json("loop_summary.json", &trace.summary_json())?;

    // Mutation base rate at sigma = 0.01.
    let n_mutants = cfg.usize_param("mutation_samples", 500)?;
    let safe_mutants = (0..n_mutants as u64)
        .into_par_iter()
        .map(|i| -> Result<u64> {
            let mut child = rng.child_indexed("mutation-rate", i);
            let m = gaussian_mutation(&theta0, 0.01, &mut child);
            Ok(oracle.evaluate(&m)?.safe as u64)
        })
        .collect::<Result<Vec<_>>>()?
        .iter()
        .sum::<u64>();
    let rate = safe_mutants as f64 / n_mutants as f64;
    rec.metric("mutation_safe_rate", rate);
    rec.check(
        (rate - 0.19).abs() <= 0.05,
        "mutation base rate within 0.19 +/- 0.05",
    );

    // Gate cost versus oracle cost (reported to timing.json only).
    let mut probe_rng = rng.child("cost-probes");
    let probes: Vec<_> = (0..16)
        .map(|_| gaussian_mutation(&theta0, sigma_loop, &mut probe_rng))
        .collect();
    let cost = oracle_cost_probe(
        &oracle,
        |t| ball.check(t).map(|d| d.is_accept()).unwrap_or(false),
        &probes,
        200,
    )?;
    rec.check(
        cost.speedup >= 100.0,
        "gate at least 100x cheaper than oracle",
    );
    rec.check(cost.gate_ms < 0.1, "gate check under 0.1 ms");
    rec.write_timing(&[
        ("gate_ms", cost.gate_ms),
        ("oracle_ms", cost.oracle_ms),
        ("speedup", cost.speedup),
    ])?;

    rec.write_csv(
        "results.csv",
        &["metric", "value"],
        &[
            vec!["margin".into(), fmt(margin)],
            vec!["l_cons".into(), fmt(ball.lipschitz.l_cons)],
            vec!["r".into(), fmt(ball.radius)],
            vec!["inside_unsafe".into(), audit.inside_unsafe.to_string()],
            vec!["loop_acceptance".into(), fmt(trace.acceptance_rate())],
            vec!["loop_delta".into(), trace.sum_false_accepts.to_string()],
            vec!["mutation_safe_rate".into(), fmt(rate)],
        ],
    )?;
    rec.finish()
}

/// Scaling sweep: ball construction and soundness at several hidden
/// widths, with the sigma* power-law fit. Widths beyond 24 hidden units
/// are opt-in via the `hidden` override.
pub fn run_s5_2(cfg: &ExperimentConfig) -> Result<RunReport> {
    let mut rec = Recorder::new(cfg)?;
    let oracle = pipeline::build_oracle(cfg)?;
    let hidden = cfg.usize_list_param("hidden", &[6, 12, 24])?;
    let candidates = pipeline::default_candidates(cfg)?;
    let audit_samples = cfg.usize_param("audit_inside", 200)?;
    let rng = RngStream::new(cfg.seed);

    let mut rows = Vec::new();
    let mut sigma_points = Vec::new();
    for &n_hid in &hidden {
        let arch = pipeline::arch_for_hidden(n_hid);
        let d = arch.dimension();
        let (theta0, margin) = pipeline::search(&oracle, n_hid, candidates, cfg.seed)?;
        let opts = EmpiricalOptions {
            n_random: cfg.usize_param("lipschitz_random", 200)?,
            n_axis: cfg.usize_param("lipschitz_axis", 20)?,
            ..Default::default()
        };
        let bounds = pipeline::all_bounds(&theta0, &oracle, &opts, cfg.seed)?;
        rec.check(
            bounds.empirical.l_raw <= bounds.trajectory.l_raw
                && bounds.trajectory.l_raw <= bounds.gronwall.l_raw,
            &format!("bound ordering at d={d}"),
        );

        let ball_emp = pipeline::build_ball(&theta0, &oracle, &bounds, LipschitzMethod::Empirical)?;
        let ball_traj =
            pipeline::build_ball(&theta0, &oracle, &bounds, LipschitzMethod::Trajectory)?;
        let audit_rng = rng.child(&format!("audit-{n_hid}"));
        let audit_traj = soundness_audit(&ball_traj, &oracle, audit_samples, 0, &audit_rng)?;
        let audit_emp = soundness_audit(
            &ball_emp,
            &oracle,
            audit_samples,
            0,
            &audit_rng.child("emp"),
        )?;
        rec.check(
            audit_traj.inside_unsafe == 0,
            &format!("trajectory ball sound at d={d}"),
        );
        let sigma_star = calibrate_sigma_star(&ball_emp, 200, &rng.child(&format!("star-{n_hid}")));
        sigma_points.push((d as f64, sigma_star));

        rec.metric(&format!("margin_d{d}"), margin);
        rec.metric(&format!("l_emp_d{d}"), bounds.empirical.l_raw);
        rec.metric(&format!("l_traj_d{d}"), bounds.trajectory.l_raw);
        rec.metric(&format!("l_gronwall_d{d}"), bounds.gronwall.l_raw);
        rec.metric(&format!("sigma_star_d{d}"), sigma_star);
        rows.push(vec![
            n_hid.to_string(),
            d.to_string(),
            fmt(margin),
            fmt(bounds.empirical.l_raw),
            fmt(bounds.trajectory.l_raw),
            fmt(bounds.gronwall.l_raw),
            fmt(ball_emp.radius),
            fmt(ball_traj.radius),
            fmt(sigma_star),
            fmt(1.0 - audit_traj.inside_unsafe as f64 / audit_samples as f64),
            fmt(1.0 - audit_emp.inside_unsafe as f64 / audit_samples as f64),
        ]);
    }
    rec.write_csv(
        "results.csv",
        &[
            "n_hid",
            "d",
            "margin",
            "l_emp",
            "l_traj",
            "l_gronwall",
            "r_emp",
            "r_traj",
            "sigma_star",
            "sound_traj",
            "sound_emp",
        ],
        &rows,
    )?;

    if sigma_points.len() >= 3 {
        // sigma* ~ d^a: reuse the decay fit (which returns the exponent of
        // sigma ~ n^-p, so a = -p).
        let exponent = fit_decay_exponent(&sigma_points).map(|p| -p);
        if let Some(a) = exponent {
            rec.metric("sigma_star_exponent", a);
            rec.check(
                (-0.8..=-0.3).contains(&a),
                "sigma* scaling exponent within [-0.8, -0.3]",
            );
        } else {
            rec.check(false, "sigma* exponent fit failed");
        }
        let chart = Chart {
            title: "Calibrated mutation scale versus dimension".into(),
            x_label: "parameter dimension d".into(),
            y_label: "sigma*".into(),
            log_x: true,
            log_y: true,
            series: vec![Series {
                name: "sigma* (50% in-ball probes)".into(),
                points: sigma_points,
            }],
        };
        rec.write_svg("sigma_star_scaling.svg", &chart.render())?;
    }
    rec.write_timing(&[])?;
    rec.finish()
}

/// Ablation grid: domain size x Lipschitz safety factor, soundness per
/// cell. Factors at or above 2.0 are expected to hold 100% soundness.
pub fn run_ablation(cfg: &ExperimentConfig) -> Result<RunReport> {
    let mut rec = Recorder::new(cfg)?;
    let m_values = cfg.usize_list_param("domain_sizes", &[10, 25, 50, 100, 200])?;
    let factors = cfg.f64_list_param("safety_factors", &[1.0, 1.5, 2.0, 2.5, 3.0, 4.0])?;
    let candidates = pipeline::default_candidates(cfg)?;
    let audit_samples = cfg.usize_param("audit_inside", 200)?;
    let domain_seed = cfg.u64_param("domain_seed", safegate_core::oracle::DEFAULT_DOMAIN_SEED)?;
    let rng = RngStream::new(cfg.seed);

    let mut rows = Vec::new();
    let mut factor_ge2_sound = true;
    for &m in &m_values {
        let trajs = m.min(15);
        let domain = OperatingDomain::generate(m, domain_seed, 200, trajs)?;
        let oracle = Oracle::new(domain, PhysicsConfig::default());
        let (theta0, margin) = pipeline::search(&oracle, 12, candidates, cfg.seed)?;
        let est = estimate_empirical(
            &theta0,
            &oracle,
            &EmpiricalOptions {
                n_random: 150,
                n_axis: 30,
                ..Default::default()
            },
            &rng.child(&format!("lipschitz-m{m}")),
        )?;
        for &factor in &factors {
            let scaled = safegate_core::lipschitz::LipschitzEstimate::new(
                est.method,
                est.l_raw,
                factor,
                est.samples,
                est.scales.clone(),
            );
            let ball = construct_ball(&theta0, &oracle, scaled)?;
            let audit = soundness_audit(
                &ball,
                &oracle,
                audit_samples,
                0,
                &rng.child(&format!("audit-m{m}-k{factor}")),
            )?;
            let sound_pct = 1.0 - audit.inside_unsafe as f64 / audit_samples as f64;
            if factor >= 2.0 && audit.inside_unsafe > 0 {
                factor_ge2_sound = false;
                rec.check(false, &format!("soundness at M={m}, factor={factor}"));
            }
            rec.metric(&format!("sound_m{m}_k{factor}"), sound_pct);
            rows.push(vec![
                m.to_string(),
                fmt(factor),
                fmt(margin),
                fmt(est.l_raw),
                fmt(ball.radius),
                audit.inside_unsafe.to_string(),
                fmt(sound_pct),
            ]);
        }
    }
    rec.metric("cells", (m_values.len() * factors.len()) as f64);
    rec.metric("factor_ge2_all_sound", factor_ge2_sound as u8 as f64);
    rec.write_csv(
        "results.csv",
        &[
            "domain_size",
            "safety_factor",
            "margin",
            "l_raw",
            "radius",
            "inside_unsafe",
            "soundness",
        ],
        &rows,
    )?;
    rec.write_timing(&[])?;
    rec.finish()
}
