//! Classification-gate experiments: the task-specific gates (static and
//! retrained MLP), the five classical baselines, and the full
//! classifier-by-feature-map grid. Every configuration runs the gated
//! self-improvement loop and gets a dual-condition verdict; the expected
//! outcome is FAIL across the board.

use anyhow::Result;
use rayon::prelude::*;

use safegate_core::gates::classify::ClassifierKind;
use safegate_core::gates::features::{generate_labeled_dataset, FeatureKind, LabeledDataset};
use safegate_core::gates::{
    run_gated_loop, ClassifierGate, DualVerdict, GateTrace, DEFAULT_WINDOW,
};
use safegate_core::oracle::Oracle;
use safegate_core::params::ParamVector;
use safegate_core::rng::RngStream;

use crate::config::ExperimentConfig;
use crate::outputs::{fmt, Recorder, RunReport};
use crate::pipeline;
use crate::svg::{Chart, Series};

const MUTATION_SIGMA: f64 = 0.01;

fn trace_row(name: &str, train_acc: Option<f64>, trace: &GateTrace) -> Vec<String> {
    vec![
        name.to_string(),
        train_acc.map(fmt).unwrap_or_default(),
        trace.sum_false_accepts.to_string(),
        trace.sum_true_accepts.to_string(),
        fmt(trace.mean_delta()),
        fmt(trace.mean_tpr()),
        trace.fitted_p.map(fmt).unwrap_or_default(),
        fmt(trace.acceptance_rate()),
        trace.verdict.to_string(),
    ]
}

const TRACE_COLUMNS: [&str; 9] = [
    "gate",
    "train_accuracy",
    "sum_delta",
    "sum_tpr",
    "mean_delta",
    "mean_tpr",
    "fitted_p",
    "acceptance_rate",
    "verdict",
];

fn delta_chart(traces: &[(&str, &GateTrace)]) -> Chart {
    Chart {
        title: "Windowed false-accept rate over the gated loop".into(),
        x_label: "step (window midpoint)".into(),
        y_label: "windowed delta".into(),
        log_x: false,
        log_y: false,
        series: traces
            .iter()
            .map(|(name, t)| Series {
                name: name.to_string(),
                points: t.windows.iter().map(|w| (w.midpoint, w.delta)).collect(),
            })
            .collect(),
    }
}

/// Task-specific gates: a static 32-unit MLP on raw parameters trained on
/// 200 labeled examples, and the same architecture retrained every 50
/// steps on accumulated labels.
pub fn run_s4_1(cfg: &ExperimentConfig) -> Result<RunReport> {
    let mut rec = Recorder::new(cfg)?;
    let oracle = pipeline::build_oracle(cfg)?;
    let candidates = pipeline::default_candidates(cfg)?;
    let steps = cfg.usize_param("loop_steps", 500)?;
    let (theta0, margin) = pipeline::search(&oracle, 12, candidates, cfg.seed)?;
    rec.metric("theta0_margin", margin);

    let rng = RngStream::new(cfg.seed);
    let base = generate_labeled_dataset(
        &oracle,
        &theta0,
        cfg.usize_param("gate_train_samples", 200)?,
        FeatureKind::RawParams,
        &rng.child("gate-dataset"),
    )?;

    let mut rows = Vec::new();
    let mut traces = Vec::new();
    for (label, retrain) in [("gate_a_static", None), ("gate_b_retrained", Some(50))] {
        let mut gate =
            ClassifierGate::train_static(ClassifierKind::Mlp32, base.clone(), rng.child(label))?;
        if let Some(every) = retrain {
            gate = gate.with_retraining(every);
        }
        let train_acc = gate.model().train_accuracy;
        let mut loop_rng = rng.child(&format!("{label}-loop"));
        let trace = run_gated_loop(
            &mut gate,
            &oracle,
            &theta0,
            MUTATION_SIGMA,
            steps,
            DEFAULT_WINDOW,
            &mut loop_rng,
        )?;
        rec.check(
            trace.verdict == DualVerdict::Fail,
            &format!("{label}: dual verdict must be FAIL"),
        );
        rec.metric(
            &format!("{label}_sum_delta"),
            trace.sum_false_accepts as f64,
        );
        rec.metric(&format!("{label}_sum_tpr"), trace.sum_true_accepts as f64);
        rec.metric(&format!("{label}_mean_delta"), trace.mean_delta());
        rec.metric(
            &format!("{label}_fitted_p"),
            trace.fitted_p.unwrap_or(f64::NAN),
        );
        rec.write_text(&format!("{label}_trace.csv"), &trace.to_csv())?;
        rows.push(trace_row(label, Some(train_acc), &trace));
        traces.push((label, trace));
    }
    rec.write_csv("results.csv", &TRACE_COLUMNS, &rows)?;
    let chart = delta_chart(&traces.iter().map(|(n, t)| (*n, t)).collect::<Vec<_>>());
    rec.write_svg("windowed_delta.svg", &chart.render())?;
    rec.write_timing(&[])?;
    rec.finish()
}

/// Five classical classifier families on the handcrafted features,
/// trained on 300 labeled examples.
pub fn run_s4_2(cfg: &ExperimentConfig) -> Result<RunReport> {
    let mut rec = Recorder::new(cfg)?;
    let oracle = pipeline::build_oracle(cfg)?;
    let candidates = pipeline::default_candidates(cfg)?;
    let steps = cfg.usize_param("loop_steps", 500)?;
    let n_train = cfg.usize_param("train_samples", 300)?;
    let (theta0, margin) = pipeline::search(&oracle, 12, candidates, cfg.seed)?;
    rec.metric("theta0_margin", margin);

    let rng = RngStream::new(cfg.seed);
    let dataset = generate_labeled_dataset(
        &oracle,
        &theta0,
        n_train,
        FeatureKind::Handcrafted13,
        &rng.child("baseline-dataset"),
    )?;
    rec.write_text(
        "train_dataset.csv",
        &dataset.to_csv(&FeatureKind::Handcrafted13.column_names(theta0.dimension())),
    )?;

    let cells = classifier_grid(
        &oracle,
        &theta0,
        &ClassifierKind::CLASSICAL,
        &[(FeatureKind::Handcrafted13, dataset)],
        steps,
        &rng,
    )?;
    let mut rows = Vec::new();
    let mut all_fail = true;
    for cell in &cells {
        all_fail &= cell.trace.verdict == DualVerdict::Fail;
        rec.metric(
            &format!("{}_sum_delta", cell.kind.name()),
            cell.trace.sum_false_accepts as f64,
        );
        rows.push(trace_row(
            cell.kind.name(),
            Some(cell.train_accuracy),
            &cell.trace,
        ));
    }
    rec.check(all_fail, "all five classical baselines must FAIL");
    rec.metric("n_fail", cells.len() as f64);
    rec.write_csv("results.csv", &TRACE_COLUMNS, &rows)?;
    let chart = delta_chart(
        &cells
            .iter()
            .map(|c| (c.kind.name(), &c.trace))
            .collect::<Vec<_>>(),
    );
    rec.write_svg("windowed_delta.svg", &chart.render())?;
    rec.write_timing(&[])?;
    rec.finish()
}

/// The full grid: every classifier kind on every feature map, trained on
/// 1000 labeled examples drawn from one shared mutation pool.
pub fn run_s4_3(cfg: &ExperimentConfig) -> Result<RunReport> {
    let mut rec = Recorder::new(cfg)?;
    let oracle = pipeline::build_oracle(cfg)?;
    let candidates = pipeline::default_candidates(cfg)?;
    let steps = cfg.usize_param("loop_steps", 500)?;
    let n_train = cfg.usize_param("train_samples", 1000)?;
    let (theta0, margin) = pipeline::search(&oracle, 12, candidates, cfg.seed)?;
    rec.metric("theta0_margin", margin);

    let rng = RngStream::new(cfg.seed);
    // The same child label draws the same mutation pool per map, so the
    // three feature representations see identical labeled controllers.
    let datasets: Vec<(FeatureKind, LabeledDataset)> = FeatureKind::ALL
        .iter()
        .map(|&map| -> Result<_> {
            Ok((
                map,
                generate_labeled_dataset(&oracle, &theta0, n_train, map, &rng.child("grid-pool"))?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    if let Some((map, ds)) = datasets.first() {
        rec.write_text(
            "train_dataset_handcrafted13.csv",
            &ds.to_csv(&map.column_names(theta0.dimension())),
        )?;
    }

    let cells = classifier_grid(
        &oracle,
        &theta0,
        &ClassifierKind::ALL,
        &datasets,
        steps,
        &rng,
    )?;
    let mut rows = Vec::new();
    let mut n_fail = 0usize;
    for cell in &cells {
        let name = format!("{}-{}", cell.kind.name(), cell.map.name());
        if cell.trace.verdict == DualVerdict::Fail {
            n_fail += 1;
        } else {
            rec.check(false, &format!("{name}: dual verdict must be FAIL"));
        }
        let mut row = trace_row(&name, Some(cell.train_accuracy), &cell.trace);
        row.insert(1, cell.map.name().to_string());
        rows.push(row);
    }
    rec.metric("cells", cells.len() as f64);
    rec.metric("cells_fail", n_fail as f64);
    let deep = cells
        .iter()
        .find(|c| c.kind == ClassifierKind::DeepMlp && c.map == FeatureKind::RawParams)
        .expect("deep MLP raw cell exists");
    rec.metric("deep_mlp_raw_train_accuracy", deep.train_accuracy);
    rec.check(
        deep.train_accuracy >= 1.0 - 1e-12,
        "deep MLP must reach 100% training accuracy on raw parameters",
    );

    let mut columns = TRACE_COLUMNS.to_vec();
    columns.insert(1, "feature_map");
    rec.write_csv("results.csv", &columns, &rows)?;
    rec.write_timing(&[])?;
    rec.finish()
}

/// One grid cell: a trained classifier and its gated-loop trace.
pub struct GridCell {
    pub kind: ClassifierKind,
    pub map: FeatureKind,
    pub train_accuracy: f64,
    pub ridge_warned: bool,
    pub trace: GateTrace,
}

/// Train `kinds x datasets` classifier gates and run each through the
/// 500-step loop. Cells run in parallel; results keep grid order.
pub fn classifier_grid(
    oracle: &Oracle,
    theta0: &ParamVector,
    kinds: &[ClassifierKind],
    datasets: &[(FeatureKind, LabeledDataset)],
    steps: usize,
    rng: &RngStream,
) -> Result<Vec<GridCell>> {
    let jobs: Vec<(ClassifierKind, &FeatureKind, &LabeledDataset)> = kinds
        .iter()
        .flat_map(|&k| datasets.iter().map(move |(m, d)| (k, m, d)))
        .collect();
    jobs.into_par_iter()
        .map(|(kind, map, dataset)| -> Result<GridCell> {
            let label = format!("cell-{}-{}", kind.name(), map.name());
            let mut gate = ClassifierGate::train_static(kind, dataset.clone(), rng.child(&label))?;
            let train_accuracy = gate.model().train_accuracy;
            let ridge_warned = gate.model().ridge_warned;
            let mut loop_rng = rng.child(&format!("{label}-loop"));
            // Fork the oracle per cell: the loop's gate-independence check
            // reads the call counter, which must not see sibling cells.
            let cell_oracle = oracle.fork();
            let trace = run_gated_loop(
                &mut gate,
                &cell_oracle,
                theta0,
                MUTATION_SIGMA,
                steps,
                DEFAULT_WINDOW,
                &mut loop_rng,
            )?;
            Ok(GridCell {
                kind,
                map: *map,
                train_accuracy,
                ridge_warned,
                trace,
            })
        })
        .collect()
}
