//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line (visible with `--nocapture`; a FAIL also fails the test).
//!
//! Heavy fixtures (controller searches, Lipschitz bounds) are computed
//! once per (dimension, seed) and shared across criteria.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use safegate_core::ball::{
    calibrate_loop_sigma, calibrate_sigma_star, chain, construct_ball, directed_improve,
    gated_loop, soundness_audit, Ball, ChainOptions,
};
use safegate_core::gates::classify::ClassifierKind;
use safegate_core::gates::features::{generate_labeled_dataset, FeatureKind, LabeledDataset};
use safegate_core::gates::{DualVerdict, DEFAULT_WINDOW};
use safegate_core::lipschitz::{
    estimate_empirical, per_group_bounds, EmpiricalOptions, LipschitzMethod,
};
use safegate_core::oracle::{search_safe_controller, Oracle};
use safegate_core::params::{gaussian_mutation, GroupKind, LtcArchitecture, ParamVector};
use safegate_core::rng::RngStream;
use safegate_core::theory::{
    ceiling, fit_decay_exponent, gaussian_renyi, holder_bound, monte_carlo_ceiling,
    synthetic_ds_experiment, tpr_np, CeilingParams, GaussianPair, SyntheticConfig,
};
use safegate_harness::experiments::classifier_grid;

const SEEDS: [u64; 5] = [42, 43, 44, 45, 46];

fn oracle() -> &'static Oracle {
    static ORACLE: OnceLock<Oracle> = OnceLock::new();
    ORACLE.get_or_init(Oracle::with_default_domain)
}

type SearchCache = Mutex<HashMap<(usize, u64), (ParamVector, f64)>>;

/// Phase-1 search results, shared across criteria.
fn searched(n_hid: usize, seed: u64) -> (ParamVector, f64) {
    static CACHE: OnceLock<SearchCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().unwrap().get(&(n_hid, seed)) {
        return hit.clone();
    }
    let arch = LtcArchitecture::new(4, n_hid, 2).unwrap();
    let rng = RngStream::new(seed);
    let found = search_safe_controller(oracle(), arch, 5000, &rng)
        .unwrap_or_else(|e| panic!("search failed at n_hid={n_hid} seed={seed}: {e}"));
    cache.lock().unwrap().insert((n_hid, seed), found.clone());
    found
}

fn empirical_ball(n_hid: usize, seed: u64) -> Ball {
    let (theta0, _) = searched(n_hid, seed);
    let est = estimate_empirical(
        &theta0,
        oracle(),
        &EmpiricalOptions::default(),
        &RngStream::new(seed).child("acceptance-lipschitz"),
    )
    .unwrap();
    construct_ball(&theta0, oracle(), est).unwrap()
}

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "ACCEPT {criterion}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{criterion}: {detail}");
}

#[test]
fn criterion_01_ceiling_table() {
    let mut detail = String::new();
    let mut ok = true;
    for (ds, want) in [(0.5, 4.3), (1.0, 15.1), (1.5, 42.0), (2.0, 95.0)] {
        let got = ceiling(&CeilingParams::new(500, 1.0, ds).unwrap()).unwrap();
        ok &= (got - want).abs() <= 0.2;
        detail.push_str(&format!("U*({ds})={got:.2} "));
    }
    report("01 ceiling-table", ok, detail.trim());
}

#[test]
fn criterion_02_np_point() {
    let got = tpr_np(0.185, 2.0).unwrap();
    report(
        "02 np-point",
        (got - 0.864).abs() <= 0.005,
        &format!("tpr_np(0.185, 2.0) = {got:.5}"),
    );
}

#[test]
fn criterion_03_and_08_ball_soundness_and_bound_ordering() {
    let mut detail = String::new();
    let mut sound_ok = true;
    let mut order_ok = true;
    for n_hid in [6usize, 12] {
        let d = LtcArchitecture::new(4, n_hid, 2).unwrap().dimension();
        for seed in SEEDS {
            let (theta0, _) = searched(n_hid, seed);
            let rng = RngStream::new(seed);
            let emp = estimate_empirical(
                &theta0,
                oracle(),
                &EmpiricalOptions::default(),
                &rng.child("c3-emp"),
            )
            .unwrap();
            let traj =
                safegate_core::lipschitz::trajectory_sensitivity_bound(&theta0, oracle(), None)
                    .unwrap();
            let horizon = oracle().domain.steps_per_traj as f64 * oracle().physics.dt;
            let gron = safegate_core::lipschitz::gronwall_bound(&theta0, horizon).unwrap();
            order_ok &= emp.l_raw <= traj.l_raw && traj.l_raw <= gron.l_raw;

            let ball = construct_ball(&theta0, oracle(), traj.clone()).unwrap();
            let audit = soundness_audit(&ball, oracle(), 200, 0, &rng.child("c3-audit")).unwrap();
            sound_ok &= audit.inside_unsafe == 0;
            if audit.inside_unsafe > 0 {
                detail.push_str(&format!(
                    "d={d} seed={seed}: {} unsafe! ",
                    audit.inside_unsafe
                ));
            }
        }
        detail.push_str(&format!("d={d}: 5 seeds x 200 samples sound; "));
    }
    report("03 ball-soundness", sound_ok, detail.trim());
    report(
        "08 bound-ordering",
        order_ok,
        "L_emp <= L_traj <= L_gronwall at d in {84, 240} x 5 seeds",
    );
}

#[test]
fn criterion_04_ball_gated_loop() {
    let ball = empirical_ball(12, 42);
    let rng = RngStream::new(42);
    let sigma = calibrate_loop_sigma(&ball, 500, 0.92, &rng.child("c4-sigma"));
    let mut loop_rng = rng.child("c4-loop");
    let trace = gated_loop(&ball, oracle(), sigma, 500, DEFAULT_WINDOW, &mut loop_rng).unwrap();
    report(
        "04 ball-gated-loop",
        trace.sum_false_accepts == 0 && trace.acceptance_rate() >= 0.9,
        &format!(
            "sigma={sigma:.2e} acceptance={:.3} delta={}",
            trace.acceptance_rate(),
            trace.sum_false_accepts
        ),
    );
}

#[test]
fn criterion_05_classifier_universality() {
    // 2D system: every classifier kind x feature map over 500 steps.
    let (theta0, _) = searched(12, 42);
    let rng = RngStream::new(42).child("c5");
    let datasets: Vec<(FeatureKind, LabeledDataset)> = FeatureKind::ALL
        .iter()
        .map(|&map| {
            (
                map,
                generate_labeled_dataset(oracle(), &theta0, 1000, map, &rng.child("pool")).unwrap(),
            )
        })
        .collect();
    let cells = classifier_grid(
        oracle(),
        &theta0,
        &ClassifierKind::ALL,
        &datasets,
        500,
        &rng,
    )
    .unwrap();
    let mut all_fail = true;
    for cell in &cells {
        if cell.trace.verdict != DualVerdict::Fail {
            all_fail = false;
            println!(
                "  2D cell {}-{} unexpectedly passed the dual conditions",
                cell.kind.name(),
                cell.map.name()
            );
        }
    }

    // Synthetic Gaussians at each separation.
    let synth = SyntheticConfig::default();
    let mut best_delta_at_1 = f64::NAN;
    for ds in [0.5, 1.0, 1.5, 2.0] {
        let r = synthetic_ds_experiment(
            ds,
            &synth,
            &RngStream::new(42).child(&format!("c5-ds-{ds}")),
        )
        .unwrap();
        all_fail &= r.all_fail;
        if ds == 1.0 {
            best_delta_at_1 = r.best_delta;
        }
    }
    let delta_ok = (best_delta_at_1 - 0.284).abs() <= 0.05;
    report(
        "05 classifier-universality",
        all_fail && delta_ok,
        &format!(
            "{} 2D cells + 28 synthetic runs all FAIL; best delta at ds=1.0: {best_delta_at_1:.3}",
            cells.len()
        ),
    );
}

#[test]
fn criterion_06_mutation_base_rate() {
    let (theta0, _) = searched(12, 42);
    let rng = RngStream::new(42);
    let n = 500;
    let mut safe = 0;
    for i in 0..n {
        let mut child = rng.child_indexed("mutation-rate", i);
        let m = gaussian_mutation(&theta0, 0.01, &mut child);
        if oracle().evaluate(&m).unwrap().safe {
            safe += 1;
        }
    }
    let rate = safe as f64 / n as f64;
    report(
        "06 mutation-base-rate",
        (rate - 0.19).abs() <= 0.05,
        &format!("safe fraction {rate:.3} over {n} mutants at sigma=0.01"),
    );
}

#[test]
fn criterion_07_holder_dominance() {
    // Analytic: NP TPR below the Hölder bound on the grid.
    let mut analytic_ok = true;
    for ds in [0.5, 1.0, 1.5, 2.0] {
        for alpha in [1.5, 2.0, 4.0, 8.0] {
            let d_a = gaussian_renyi(alpha, ds);
            let mut delta = 1e-4;
            while delta <= 0.5 {
                let np = tpr_np(delta, ds).unwrap();
                let bound = holder_bound(delta, alpha, d_a).unwrap();
                analytic_ok &= np <= bound * (1.0 + 1e-12);
                delta *= 1.6;
            }
        }
    }
    // Monte Carlo: measured NP TPR within 3 SE below the bound.
    let mut mc_ok = true;
    let pair = GaussianPair::new(50, 1.0).unwrap();
    let mut rng = RngStream::new(42).child("c7-mc");
    for delta in [1e-3, 1e-2, 0.1, 0.3] {
        let threshold = safegate_core::theory::normal_quantile(1.0 - delta).unwrap();
        let n = 20_000;
        let mut hits = 0usize;
        for _ in 0..n {
            let x = pair.sample(true, &mut rng);
            if x[0] > threshold {
                hits += 1;
            }
        }
        let tpr_hat = hits as f64 / n as f64;
        let se = (tpr_hat * (1.0 - tpr_hat) / n as f64).sqrt();
        for alpha in [1.5, 2.0, 4.0, 8.0] {
            let bound = holder_bound(delta, alpha, gaussian_renyi(alpha, 1.0)).unwrap();
            mc_ok &= tpr_hat <= bound + 3.0 * se;
        }
    }
    report(
        "07 holder-dominance",
        analytic_ok && mc_ok,
        "TPR_NP <= C_a * delta^beta for alpha in {1.5, 2, 4, 8}, analytic and Monte Carlo",
    );
}

#[test]
fn criterion_09_directed_improvement() {
    let mut ok = true;
    let mut detail = String::new();
    for seed in SEEDS {
        let ball = empirical_ball(12, seed);
        let trace = directed_improve(
            &ball,
            oracle(),
            200,
            10,
            &RngStream::new(seed).child("c9-directed"),
        )
        .unwrap();
        let in_ball = trace.max_displacement <= 0.95 * ball.radius + trace.step_size + 1e-12;
        ok &= trace.improvement > 0.0 && trace.false_accepts == 0 && in_ball;
        detail.push_str(&format!("seed {seed}: +{:.5}; ", trace.improvement));
    }
    report("09 directed-improvement", ok, detail.trim());
}

#[test]
fn criterion_10_ball_chaining() {
    let mut ok = true;
    let mut detail = String::new();
    for seed in SEEDS {
        let (theta0, _) = searched(12, seed);
        let run = chain(
            &theta0,
            oracle(),
            &ChainOptions::default(),
            &RngStream::new(seed).child("c10-chain"),
        )
        .unwrap();
        let fa: usize = run.records.iter().map(|r| r.false_accepts).sum();
        let displacement_ok = run.total_displacement >= 2.0 * run.first_radius;
        ok &= run.improvement > 0.0
            && fa == 0
            && displacement_ok
            && run.truncated.is_none()
            && run.records.iter().all(|r| r.margin > 0.0);
        detail.push_str(&format!(
            "seed {seed}: +{:.5}, disp/r0={:.2}; ",
            run.improvement,
            run.total_displacement / run.first_radius.max(1e-300)
        ));
    }
    report("10 ball-chaining", ok, detail.trim());
}

#[test]
fn criterion_11_compositional_radii() {
    let (theta0, _) = searched(12, 42);
    let rng = RngStream::new(42);
    let full = estimate_empirical(
        &theta0,
        oracle(),
        &EmpiricalOptions::default(),
        &rng.child("c11-full"),
    )
    .unwrap();
    let per = per_group_bounds(
        &theta0,
        oracle(),
        LipschitzMethod::Empirical,
        &EmpiricalOptions {
            n_random: 100,
            n_axis: 20,
            ..Default::default()
        },
        &rng.child("c11-groups"),
    )
    .unwrap();
    let l_tau = per
        .groups
        .iter()
        .find(|(k, _)| *k == GroupKind::Tau)
        .map(|(_, l)| *l)
        .unwrap();
    let ratio = full.l_raw / l_tau;
    report(
        "11 compositional-radii",
        ratio > 5.0 && per.composed >= full.l_raw,
        &format!(
            "r_tau/r_full = {ratio:.1}; composed {:.2} >= full {:.2}",
            per.composed, full.l_raw
        ),
    );
}

#[test]
fn criterion_12_sigma_star_scaling() {
    let mut points = Vec::new();
    for n_hid in [6usize, 12, 24] {
        let d = LtcArchitecture::new(4, n_hid, 2).unwrap().dimension() as f64;
        let ball = empirical_ball(n_hid, 42);
        let sigma = calibrate_sigma_star(&ball, 200, &RngStream::new(42).child("c12-star"));
        points.push((d, sigma));
    }
    let exponent = fit_decay_exponent(&points).map(|p| -p).unwrap();
    report(
        "12 sigma-star-scaling",
        (-0.8..=-0.3).contains(&exponent),
        &format!(
            "exponent {exponent:.3} over d = {:?}",
            points.iter().map(|(d, _)| *d as usize).collect::<Vec<_>>()
        ),
    );
}

#[test]
fn criterion_13_monte_carlo_ceiling() {
    let params = CeilingParams::new(500, 1.0, 1.0).unwrap();
    let mc = monte_carlo_ceiling(&params, 50, 10_000, &RngStream::new(42).child("c13")).unwrap();
    report(
        "13 monte-carlo-ceiling",
        mc.mean <= 15.1 + 3.0 * mc.std_err,
        &format!(
            "estimate {:.3} +/- {:.3} vs ceiling 15.1",
            mc.mean, mc.std_err
        ),
    );
}

#[test]
fn criterion_14_ablation_grid() {
    use safegate_core::env2d::PhysicsConfig;
    use safegate_core::lipschitz::LipschitzEstimate;
    use safegate_core::oracle::OperatingDomain;

    let rng = RngStream::new(42);
    let mut ok = true;
    let mut cells = 0;
    for m in [10usize, 25, 50, 100, 200] {
        let domain = OperatingDomain::generate(m, 12345, 200, m.min(15)).unwrap();
        let local = Oracle::new(domain, PhysicsConfig::default());
        let arch = LtcArchitecture::new(4, 12, 2).unwrap();
        let (theta0, _) = search_safe_controller(&local, arch, 5000, &RngStream::new(42)).unwrap();
        let est = estimate_empirical(
            &theta0,
            &local,
            &EmpiricalOptions {
                n_random: 150,
                n_axis: 30,
                ..Default::default()
            },
            &rng.child(&format!("c14-l-{m}")),
        )
        .unwrap();
        for factor in [2.0, 2.5, 3.0, 4.0] {
            let scaled = LipschitzEstimate::new(
                est.method,
                est.l_raw,
                factor,
                est.samples,
                est.scales.clone(),
            );
            let ball = construct_ball(&theta0, &local, scaled).unwrap();
            let audit = soundness_audit(
                &ball,
                &local,
                200,
                0,
                &rng.child(&format!("c14-a-{m}-{factor}")),
            )
            .unwrap();
            ok &= audit.inside_unsafe == 0;
            cells += 1;
        }
    }
    report(
        "14 ablation-grid",
        ok,
        &format!("{cells} cells with factor >= 2.0 all 100% sound"),
    );
}
