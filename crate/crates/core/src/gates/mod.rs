//! Safety gates and the gated self-improvement loop.
//!
//! A gate filters proposed mutations cheaply; the oracle labels every
//! proposal for measurement only. The loop records per-step accept flags
//! and ground truth, windowed false-accept and true-positive rates, the
//! fitted decay exponent of the false-accept rate, and the dual-condition
//! verdict: bounded cumulative risk with non-vanishing accepted safe
//! improvement.

pub mod classify;
pub mod features;

use serde::{Deserialize, Serialize};

use crate::oracle::Oracle;
use crate::params::{gaussian_mutation, ParamVector};
use crate::rng::RngStream;
use crate::theory::fit_decay_exponent;
use crate::{Error, Result};

use classify::{train, Classifier, ClassifierKind};
use features::{FeatureKind, LabeledDataset};

/// Window length for delta/TPR rate estimates; per-step 0/1 outcomes are
/// too noisy for exponent fitting.
pub const DEFAULT_WINDOW: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateDecision {
    Accept,
    Reject,
}

impl GateDecision {
    pub fn is_accept(&self) -> bool {
        matches!(self, GateDecision::Accept)
    }
}

/// A mutation filter. `decide` must not consult the oracle; the loop
/// asserts this through the oracle's call counter. `observe` feeds back
/// measurement labels for gates that retrain online.
pub trait Gate {
    fn decide(&mut self, theta: &ParamVector) -> GateDecision;
    fn observe(&mut self, _theta: &ParamVector, _truth_safe: bool, _step: usize) {}
    fn name(&self) -> String;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DualVerdict {
    Pass,
    Fail,
}

impl std::fmt::Display for DualVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DualVerdict::Pass => write!(f, "PASS"),
            DualVerdict::Fail => write!(f, "FAIL"),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub accepted: bool,
    pub truth_safe: bool,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WindowStat {
    pub start: usize,
    pub end: usize,
    pub midpoint: f64,
    /// Accepted-unsafe fraction among unsafe proposals in the window
    /// (0 when the window saw no unsafe proposal).
    pub delta: f64,
    /// Accepted-safe fraction among safe proposals in the window.
    pub tpr: f64,
    pub n_unsafe: usize,
    pub n_safe: usize,
}

/// Per-step and windowed record of one gated run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateTrace {
    pub gate: String,
    pub window: usize,
    pub steps: Vec<StepRecord>,
    pub windows: Vec<WindowStat>,
    /// Count of accepted unsafe proposals (cumulative false accepts).
    pub sum_false_accepts: u64,
    /// Count of accepted safe proposals (cumulative true accepts).
    pub sum_true_accepts: u64,
    pub fitted_p: Option<f64>,
    pub verdict: DualVerdict,
}

impl GateTrace {
    pub fn mean_delta(&self) -> f64 {
        let unsafe_total: usize = self.windows.iter().map(|w| w.n_unsafe).sum();
        if unsafe_total == 0 {
            0.0
        } else {
            self.sum_false_accepts as f64 / unsafe_total as f64
        }
    }

    pub fn mean_tpr(&self) -> f64 {
        let safe_total: usize = self.windows.iter().map(|w| w.n_safe).sum();
        if safe_total == 0 {
            0.0
        } else {
            self.sum_true_accepts as f64 / safe_total as f64
        }
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.steps.is_empty() {
            0.0
        } else {
            self.steps.iter().filter(|s| s.accepted).count() as f64 / self.steps.len() as f64
        }
    }

    /// `step,accepted,truth,window_delta,window_tpr` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,accepted,truth,window_delta,window_tpr\n");
        for s in &self.steps {
            let w = self.windows.get((s.step - 1) / self.window);
            let (d, t) = w.map(|w| (w.delta, w.tpr)).unwrap_or((0.0, 0.0));
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                s.step,
                s.accepted as u8,
                if s.truth_safe { "safe" } else { "unsafe" },
                d,
                t
            ));
        }
        out
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "gate": self.gate,
            "steps": self.steps.len(),
            "window": self.window,
            "sum_delta": self.sum_false_accepts,
            "sum_tpr": self.sum_true_accepts,
            "mean_delta": self.mean_delta(),
            "mean_tpr": self.mean_tpr(),
            "acceptance_rate": self.acceptance_rate(),
            "fitted_p": self.fitted_p,
            "verdict": self.verdict.to_string(),
        })
    }
}

/// Incremental trace collector shared by the controller loop and the
/// synthetic Gaussian loop.
pub struct TraceBuilder {
    gate: String,
    window: usize,
    steps: Vec<StepRecord>,
}

impl TraceBuilder {
    pub fn new(gate: impl Into<String>, window: usize) -> Self {
        assert!(window >= 1);
        Self {
            gate: gate.into(),
            window,
            steps: Vec::new(),
        }
    }

    pub fn push(&mut self, accepted: bool, truth_safe: bool) {
        let step = self.steps.len() + 1;
        self.steps.push(StepRecord {
            step,
            accepted,
            truth_safe,
        });
    }

    /// Windowed estimates, exponent fit, and the dual-condition verdict.
    ///
    /// Risk arm: either no false accepts at all, or the windowed delta
    /// decays with fitted exponent p > 1. Utility arm: the final window's
    /// TPR has not collapsed below one accept per window.
    pub fn finalize(self) -> GateTrace {
        let mut windows = Vec::new();
        for chunk in self.steps.chunks(self.window) {
            let start = chunk.first().map(|s| s.step).unwrap_or(0);
            let end = chunk.last().map(|s| s.step).unwrap_or(0);
            let n_unsafe = chunk.iter().filter(|s| !s.truth_safe).count();
            let n_safe = chunk.len() - n_unsafe;
            let fa = chunk.iter().filter(|s| s.accepted && !s.truth_safe).count();
            let ta = chunk.iter().filter(|s| s.accepted && s.truth_safe).count();
            windows.push(WindowStat {
                start,
                end,
                midpoint: (start + end) as f64 / 2.0,
                delta: if n_unsafe == 0 {
                    0.0
                } else {
                    fa as f64 / n_unsafe as f64
                },
                tpr: if n_safe == 0 {
                    0.0
                } else {
                    ta as f64 / n_safe as f64
                },
                n_unsafe,
                n_safe,
            });
        }
        let sum_false_accepts = self
            .steps
            .iter()
            .filter(|s| s.accepted && !s.truth_safe)
            .count() as u64;
        let sum_true_accepts = self
            .steps
            .iter()
            .filter(|s| s.accepted && s.truth_safe)
            .count() as u64;

        let nonzero: Vec<(f64, f64)> = windows
            .iter()
            .filter(|w| w.delta > 0.0)
            .map(|w| (w.midpoint, w.delta))
            .collect();
        let fitted_p = fit_decay_exponent(&nonzero);

        let risk_ok = if nonzero.is_empty() {
            true
        } else {
            fitted_p.map(|p| p > 1.0).unwrap_or(false)
        };
        let utility_ok = windows
            .last()
            .map(|w| w.tpr >= 1.0 / self.window as f64)
            .unwrap_or(false);
        let verdict = if risk_ok && utility_ok {
            DualVerdict::Pass
        } else {
            DualVerdict::Fail
        };

        GateTrace {
            gate: self.gate,
            window: self.window,
            steps: self.steps,
            windows,
            sum_false_accepts,
            sum_true_accepts,
            fitted_p,
            verdict,
        }
    }
}

/// Run the gated self-improvement loop on the 2D system.
///
/// Per step: propose a Gaussian mutation of the current controller, let
/// the gate decide, label the proposal with the oracle (measurement
/// only), and advance the controller on accepted safe mutations. The
/// oracle counter must not move inside `decide`.
pub fn run_gated_loop(
    gate: &mut dyn Gate,
    oracle: &Oracle,
    theta_init: &ParamVector,
    sigma: f64,
    n_steps: usize,
    window: usize,
    rng: &mut RngStream,
) -> Result<GateTrace> {
    let mut builder = TraceBuilder::new(gate.name(), window);
    let mut theta = theta_init.clone();
    for step in 1..=n_steps {
        let proposal = gaussian_mutation(&theta, sigma, rng);
        let calls_before = oracle.calls();
        let decision = gate.decide(&proposal);
        if oracle.calls() != calls_before {
            return Err(Error::GateTouchedOracle { step });
        }
        let truth = oracle.evaluate(&proposal)?;
        builder.push(decision.is_accept(), truth.safe);
        gate.observe(&proposal, truth.safe, step);
        if decision.is_accept() && truth.safe {
            theta = proposal;
        }
    }
    Ok(builder.finalize())
}

/// Gate that accepts everything; measures the unsafe-proposal base rate.
pub struct AcceptAllGate;

impl Gate for AcceptAllGate {
    fn decide(&mut self, _theta: &ParamVector) -> GateDecision {
        GateDecision::Accept
    }
    fn name(&self) -> String {
        "accept_all".into()
    }
}

/// Gate that rejects everything; the vacuous baseline.
pub struct RejectAllGate;

impl Gate for RejectAllGate {
    fn decide(&mut self, _theta: &ParamVector) -> GateDecision {
        GateDecision::Reject
    }
    fn name(&self) -> String {
        "reject_all".into()
    }
}

/// A trained classifier used as a gate, optionally retrained every
/// `retrain_every` steps on the base set plus all observed labels.
pub struct ClassifierGate {
    kind: ClassifierKind,
    feature_map: FeatureKind,
    model: Classifier,
    base: LabeledDataset,
    accumulated_features: Vec<Vec<f64>>,
    accumulated_labels: Vec<bool>,
    retrain_every: Option<usize>,
    rng: RngStream,
}

impl ClassifierGate {
    pub fn train_static(
        kind: ClassifierKind,
        dataset: LabeledDataset,
        rng: RngStream,
    ) -> Result<Self> {
        let mut train_rng = rng.child("initial-train");
        let model = train(kind, &dataset, &mut train_rng)?;
        Ok(Self {
            kind,
            feature_map: dataset.feature_map,
            model,
            base: dataset,
            accumulated_features: Vec::new(),
            accumulated_labels: Vec::new(),
            retrain_every: None,
            rng,
        })
    }

    pub fn with_retraining(mut self, every: usize) -> Self {
        assert!(every >= 1);
        self.retrain_every = Some(every);
        self
    }

    pub fn model(&self) -> &Classifier {
        &self.model
    }
}

impl Gate for ClassifierGate {
    fn decide(&mut self, theta: &ParamVector) -> GateDecision {
        let x = self.feature_map.extract(theta);
        if self.model.predict(&x) {
            GateDecision::Accept
        } else {
            GateDecision::Reject
        }
    }

    fn observe(&mut self, theta: &ParamVector, truth_safe: bool, step: usize) {
        let Some(every) = self.retrain_every else {
            return;
        };
        self.accumulated_features
            .push(self.feature_map.extract(theta));
        self.accumulated_labels.push(truth_safe);
        if step % every == 0 {
            let mut features = self.base.features.clone();
            let mut labels = self.base.labels.clone();
            features.extend(self.accumulated_features.iter().cloned());
            labels.extend(self.accumulated_labels.iter().cloned());
            let dataset = LabeledDataset {
                features,
                labels,
                feature_map: self.feature_map,
            };
            let mut train_rng = self.rng.child(&format!("retrain-{step}"));
            if let Ok(model) = train(self.kind, &dataset, &mut train_rng) {
                self.model = model;
            }
        }
    }

    fn name(&self) -> String {
        let mode = if self.retrain_every.is_some() {
            "retrained"
        } else {
            "static"
        };
        format!("{}-{}-{}", self.kind.name(), self.feature_map.name(), mode)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env2d::PhysicsConfig;
    use crate::oracle::OperatingDomain;
    use crate::params::LtcArchitecture;

    fn small_oracle() -> Oracle {
        let domain = OperatingDomain::generate(10, 12345, 200, 6).unwrap();
        Oracle::new(domain, PhysicsConfig::default())
    }

    fn safe_theta(oracle: &Oracle) -> ParamVector {
        let rng = RngStream::new(42);
        crate::oracle::search_safe_controller(
            oracle,
            LtcArchitecture::new(4, 6, 2).unwrap(),
            60,
            &rng,
        )
        .unwrap()
        .0
    }

    #[test]
    fn reject_all_is_vacuous_fail() {
        let oracle = small_oracle();
        let theta = safe_theta(&oracle);
        let mut rng = RngStream::new(1).child("loop");
        let trace = run_gated_loop(
            &mut RejectAllGate,
            &oracle,
            &theta,
            0.01,
            100,
            DEFAULT_WINDOW,
            &mut rng,
        )
        .unwrap();
        assert_eq!(trace.sum_false_accepts, 0);
        assert_eq!(trace.sum_true_accepts, 0);
        assert_eq!(trace.verdict, DualVerdict::Fail);
    }

    #[test]
    fn accept_all_measures_base_rate() {
        let oracle = small_oracle();
        let theta = safe_theta(&oracle);
        let mut rng = RngStream::new(2).child("loop");
        // 0.05 kicks the controller hard enough that unsafe proposals
        // show up even on this small, forgiving test domain.
        let trace = run_gated_loop(
            &mut AcceptAllGate,
            &oracle,
            &theta,
            0.05,
            150,
            DEFAULT_WINDOW,
            &mut rng,
        )
        .unwrap();
        // With everything accepted, windowed delta is 1 wherever an unsafe
        // proposal exists.
        for w in &trace.windows {
            if w.n_unsafe > 0 {
                assert_eq!(w.delta, 1.0);
            }
        }
        assert!(
            trace.sum_false_accepts > 0,
            "mutation at 0.05 should propose unsafe candidates"
        );
        assert_eq!(trace.verdict, DualVerdict::Fail); // constant delta
        assert_eq!(trace.steps.len(), 150);
    }

    #[test]
    fn empty_loop_gives_empty_trace() {
        let oracle = small_oracle();
        let theta = safe_theta(&oracle);
        let mut rng = RngStream::new(3).child("loop");
        let trace = run_gated_loop(
            &mut AcceptAllGate,
            &oracle,
            &theta,
            0.01,
            0,
            DEFAULT_WINDOW,
            &mut rng,
        )
        .unwrap();
        assert!(trace.steps.is_empty());
        assert!(trace.windows.is_empty());
        assert_eq!(trace.verdict, DualVerdict::Fail);
    }

    #[test]
    fn verdict_passes_for_zero_delta_with_high_tpr() {
        let mut b = TraceBuilder::new("ideal", 25);
        for _ in 0..500 {
            b.push(true, true);
        }
        let trace = b.finalize();
        assert_eq!(trace.verdict, DualVerdict::Pass);
        assert_eq!(trace.sum_true_accepts, 500);
        assert_eq!(trace.sum_false_accepts, 0);
        assert_eq!(trace.mean_tpr(), 1.0);
    }

    #[test]
    fn verdict_fails_on_constant_delta() {
        let mut b = TraceBuilder::new("leaky", 25);
        for i in 0..500 {
            // Alternate safe/unsafe truth; accept everything.
            b.push(true, i % 2 == 0);
        }
        let trace = b.finalize();
        assert!(trace.fitted_p.unwrap().abs() < 0.1);
        assert_eq!(trace.verdict, DualVerdict::Fail);
    }

    #[test]
    fn verdict_passes_on_fast_decay() {
        // Window w accepts floor(10/(w+1)^2) of its 10 unsafe proposals,
        // a faster-than-1/n decay, while TPR stays 1: summable risk.
        let mut b = TraceBuilder::new("decaying", 25);
        for w in 0usize..20 {
            let fa_count = 10 / ((w + 1) * (w + 1));
            for i in 0..25 {
                if i < 10 {
                    b.push(i < fa_count, false);
                } else {
                    b.push(true, true);
                }
            }
        }
        let trace = b.finalize();
        let p = trace.fitted_p.unwrap();
        assert!(p > 1.0, "fitted p {p}");
        assert_eq!(trace.verdict, DualVerdict::Pass);
    }

    #[test]
    fn retraining_gate_adapts_to_observed_labels() {
        use crate::gates::classify::ClassifierKind;
        use crate::gates::features::{FeatureKind, LabeledDataset};
        use crate::params::LtcArchitecture;

        let arch = LtcArchitecture::new(1, 1, 1).unwrap();
        let point = |v: f64| {
            let mut theta = ParamVector::zeros(arch);
            for x in &mut theta.values {
                *x = v;
            }
            theta
        };
        // Base set says positive-valued controllers are safe.
        let base = LabeledDataset {
            features: vec![vec![1.0; 5], vec![-1.0; 5]],
            labels: vec![true, false],
            feature_map: FeatureKind::RawParams,
        };
        let mut gate =
            ClassifierGate::train_static(ClassifierKind::Logistic, base, RngStream::new(3))
                .unwrap()
                .with_retraining(30);
        assert!(gate.decide(&point(1.0)).is_accept());

        // Observations overwhelmingly say the opposite; after the
        // retraining step the decision flips.
        for step in 1..=30 {
            let (theta, truth) = if step % 2 == 0 {
                (point(1.0 + 0.01 * step as f64), false)
            } else {
                (point(-1.0 - 0.01 * step as f64), true)
            };
            gate.observe(&theta, truth, step);
        }
        assert!(!gate.decide(&point(1.0)).is_accept());
        assert!(gate.name().contains("retrained"));
    }

    #[test]
    fn windows_partition_steps() {
        let mut b = TraceBuilder::new("x", 25);
        for _ in 0..130 {
            b.push(false, true);
        }
        let trace = b.finalize();
        assert_eq!(trace.windows.len(), 6); // 5 full + 1 ragged
        assert_eq!(trace.windows[0].start, 1);
        assert_eq!(trace.windows[0].end, 25);
        assert_eq!(trace.windows[5].end, 130);
    }

    #[test]
    fn csv_has_row_per_step() {
        let mut b = TraceBuilder::new("x", 10);
        for i in 0..30 {
            b.push(i % 3 == 0, i % 2 == 0);
        }
        let trace = b.finalize();
        let csv = trace.to_csv();
        assert_eq!(csv.lines().count(), 31);
        assert!(csv.starts_with("step,accepted,truth"));
    }
}
