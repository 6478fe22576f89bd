//! Verified self-improvement experiments: directed in-ball gradient
//! ascent and ball chaining.

use anyhow::Result;

use safegate_core::ball::{chain, construct_ball, directed_improve, ChainOptions};
use safegate_core::lipschitz::{estimate_empirical, EmpiricalOptions};
use safegate_core::rng::RngStream;

use crate::config::ExperimentConfig;
use crate::outputs::{fmt, Recorder, RunReport};
use crate::pipeline;
use crate::svg::{Chart, Series};

/// Directed improvement: finite-difference gradient ascent of the oracle
/// score inside one verified ball, projection at 0.95r, acceptance only
/// of in-ball nondecreasing-score steps.
pub fn run_s5_3(cfg: &ExperimentConfig) -> Result<RunReport> {
    let mut rec = Recorder::new(cfg)?;
    let oracle = pipeline::build_oracle(cfg)?;
    let candidates = pipeline::default_candidates(cfg)?;
    let steps = cfg.usize_param("steps", 200)?;
    let probes = cfg.usize_param("fd_probes", 10)?;
    let rng = RngStream::new(cfg.seed);

    let (theta0, margin) = pipeline::search(&oracle, 12, candidates, cfg.seed)?;
    let est = estimate_empirical(
        &theta0,
        &oracle,
        &EmpiricalOptions::default(),
        &rng.child("lipschitz"),
    )?;
    let ball = construct_ball(&theta0, &oracle, est)?;
    let trace = directed_improve(&ball, &oracle, steps, probes, &rng.child("directed"))?;

    rec.metric("margin", margin);
    rec.metric("radius", ball.radius);
    rec.metric("initial_score", trace.initial_score);
    rec.metric("final_score", trace.final_score);
    rec.metric("improvement", trace.improvement);
    rec.metric("relative_improvement", trace.relative_improvement);
    rec.metric("false_accepts", trace.false_accepts as f64);
    rec.metric("accepted_steps", trace.accepted_steps as f64);
    rec.metric("final_displacement", trace.final_displacement);
    rec.metric(
        "displacement_over_r",
        trace.final_displacement / ball.radius,
    );

    rec.check(trace.improvement > 0.0, "strictly positive improvement");
    rec.check(trace.false_accepts == 0, "zero false accepts");
    rec.check(
        trace.max_displacement <= 0.95 * ball.radius + trace.step_size + 1e-12,
        "iterates stay within the projection contract",
    );

    let rows: Vec<Vec<String>> = trace
        .steps
        .iter()
        .map(|s| {
            vec![
                s.step.to_string(),
                fmt(s.score),
                fmt(s.displacement),
                (s.accepted as u8).to_string(),
            ]
        })
        .collect();
    rec.write_csv(
        "results.csv",
        &["step", "score", "displacement", "accepted"],
        &rows,
    )?;
    let chart = Chart {
        title: "Directed in-ball improvement".into(),
        x_label: "step".into(),
        y_label: "oracle score".into(),
        log_x: false,
        log_y: false,
        series: vec![Series {
            name: "score".into(),
            points: trace
                .steps
                .iter()
                .map(|s| (s.step as f64, s.score))
                .collect(),
        }],
    };
    rec.write_svg("score.svg", &chart.render())?;
    rec.write_timing(&[])?;
    rec.finish()
}

/// Ball chaining: re-verify, rebuild the ball, run directed inner steps,
/// advance to the best accepted proposal, repeat.
pub fn run_s5_4(cfg: &ExperimentConfig) -> Result<RunReport> {
    let mut rec = Recorder::new(cfg)?;
    let oracle = pipeline::build_oracle(cfg)?;
    let candidates = pipeline::default_candidates(cfg)?;
    let opts = ChainOptions {
        k_chains: cfg.usize_param("chains", 10)?,
        inner_steps: cfg.usize_param("inner_steps", 50)?,
        fd_probes: cfg.usize_param("fd_probes", 10)?,
        ..Default::default()
    };
    let rng = RngStream::new(cfg.seed);

    let (theta0, margin) = pipeline::search(&oracle, 12, candidates, cfg.seed)?;
    let run = chain(&theta0, &oracle, &opts, &rng.child("chain"))?;

    rec.metric("margin", margin);
    rec.metric("initial_score", run.initial_score);
    rec.metric("final_score", run.final_score);
    rec.metric("improvement", run.improvement);
    rec.metric("relative_improvement", run.relative_improvement);
    rec.metric("total_displacement", run.total_displacement);
    rec.metric("first_radius", run.first_radius);
    rec.metric(
        "displacement_over_r0",
        run.total_displacement / run.first_radius.max(1e-300),
    );
    let total_fa: usize = run.records.iter().map(|r| r.false_accepts).sum();
    rec.metric("false_accepts", total_fa as f64);
    rec.metric("chains_completed", run.records.len() as f64);

    rec.check(run.improvement > 0.0, "cumulative improvement is positive");
    rec.check(total_fa == 0, "zero false accepts across all chains");
    rec.check(
        run.truncated.is_none(),
        "no chain was truncated by re-verification",
    );
    rec.check(
        run.total_displacement >= 2.0 * run.first_radius,
        "total displacement at least twice the first ball radius",
    );
    rec.check(
        run.records.iter().all(|r| r.margin > 0.0),
        "every chain transition re-verified with positive margin",
    );

    let rows: Vec<Vec<String>> = run
        .records
        .iter()
        .map(|r| {
            vec![
                r.index.to_string(),
                fmt(r.score),
                fmt(r.margin),
                fmt(r.radius),
                fmt(r.displacement),
                r.false_accepts.to_string(),
            ]
        })
        .collect();
    rec.write_csv(
        "results.csv",
        &[
            "chain",
            "score",
            "margin",
            "radius",
            "displacement",
            "false_accepts",
        ],
        &rows,
    )?;
    let chart = Chart {
        title: "Ball chaining: score and displacement per chain".into(),
        x_label: "chain index".into(),
        y_label: "value".into(),
        log_x: false,
        log_y: false,
        series: vec![
            Series {
                name: "score".into(),
                points: run
                    .records
                    .iter()
                    .map(|r| (r.index as f64, r.score))
                    .collect(),
            },
            Series {
                name: "displacement / r0".into(),
                points: run
                    .records
                    .iter()
                    .map(|r| {
                        (
                            r.index as f64,
                            r.displacement / run.first_radius.max(1e-300),
                        )
                    })
                    .collect(),
            },
        ],
    };
    rec.write_svg("chaining.svg", &chart.render())?;
    rec.write_timing(&[])?;
    rec.finish()
}
