//! Ground-truth safety oracle over a fixed operating domain.
//!
//! The oracle is expensive by definition: it rolls the controller over a
//! fixed set of scenarios and reports the worst obstacle clearance
//! (the safety margin) and a normalized progress score. Gates must never
//! consult it when deciding; an atomic call counter makes that auditable.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use crate::env2d::{generate_scenarios, rollout, PhysicsConfig, Scenario, TrajectoryResult};
use crate::params::{GroupKind, LtcArchitecture, ParamVector};
use crate::rng::{fnv1a64, RngStream};
use crate::{Error, Result};

pub const DEFAULT_DOMAIN_SEED: u64 = 12345;
pub const DEFAULT_SCENARIOS: usize = 100;
pub const DEFAULT_STEPS_PER_TRAJ: usize = 200;
pub const DEFAULT_TRAJS_PER_EVAL: usize = 15;
pub const DEFAULT_SEARCH_CANDIDATES: usize = 5000;

/// The fixed scenario set on which safety is defined. Evaluation uses the
/// first `trajs_per_eval` scenarios; re-verification during chaining uses
/// all of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingDomain {
    pub scenarios: Vec<Scenario>,
    pub steps_per_traj: usize,
    pub trajs_per_eval: usize,
}

impl OperatingDomain {
    pub fn new(
        scenarios: Vec<Scenario>,
        steps_per_traj: usize,
        trajs_per_eval: usize,
    ) -> Result<Self> {
        if trajs_per_eval == 0 || scenarios.len() < trajs_per_eval {
            return Err(Error::InvalidArgument(format!(
                "domain needs at least trajs_per_eval={trajs_per_eval} scenarios, got {}",
                scenarios.len()
            )));
        }
        if steps_per_traj == 0 {
            return Err(Error::InvalidArgument("steps_per_traj must be >= 1".into()));
        }
        Ok(Self {
            scenarios,
            steps_per_traj,
            trajs_per_eval,
        })
    }

    /// Default domain: 100 scenarios from seed 12345, 200 steps, 15-of-100
    /// evaluation subset.
    pub fn generate_default() -> Self {
        Self::generate(
            DEFAULT_SCENARIOS,
            DEFAULT_DOMAIN_SEED,
            DEFAULT_STEPS_PER_TRAJ,
            DEFAULT_TRAJS_PER_EVAL,
        )
        .expect("default domain parameters are valid")
    }

    pub fn generate(
        count: usize,
        seed: u64,
        steps_per_traj: usize,
        trajs_per_eval: usize,
    ) -> Result<Self> {
        let mut rng = RngStream::new(seed).child("operating-domain");
        let scenarios = generate_scenarios(count, &mut rng)?;
        Self::new(scenarios, steps_per_traj, trajs_per_eval.min(count))
    }

    pub fn eval_scenarios(&self) -> &[Scenario] {
        &self.scenarios[..self.trajs_per_eval]
    }

    /// Content fingerprint embedded in ball provenance files.
    pub fn content_id(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("domain serializes");
        format!("domain-{:016x}", fnv1a64(&bytes))
    }
}

/// Safety verdict: safe iff margin strictly positive; score in [0, 1] is
/// mean normalized progress `max(0, 1 - d_final/d_initial)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleVerdict {
    pub safe: bool,
    pub margin: f64,
    pub score: f64,
}

/// The ground-truth oracle. Pure given `(theta, domain)`; the call counter
/// only instruments gate-independence checks.
#[derive(Debug)]
pub struct Oracle {
    pub domain: OperatingDomain,
    pub physics: PhysicsConfig,
    calls: AtomicU64,
}

impl Oracle {
    pub fn new(domain: OperatingDomain, physics: PhysicsConfig) -> Self {
        Self {
            domain,
            physics,
            calls: AtomicU64::new(0),
        }
    }

    pub fn with_default_domain() -> Self {
        Self::new(
            OperatingDomain::generate_default(),
            PhysicsConfig::default(),
        )
    }

    /// Total number of oracle evaluations so far.
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    /// An oracle over the same domain and physics with its own call
    /// counter. Verdicts are identical; parallel experiment cells fork so
    /// their gate-independence instrumentation cannot cross-talk.
    pub fn fork(&self) -> Oracle {
        Oracle::new(self.domain.clone(), self.physics)
    }

    /// Evaluate on the fixed evaluation subset (first `trajs_per_eval`).
    pub fn evaluate(&self, theta: &ParamVector) -> Result<OracleVerdict> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.evaluate_on(theta, self.domain.eval_scenarios())
    }

    /// Evaluate on all `M` scenarios; used for chain re-verification.
    pub fn evaluate_full(&self, theta: &ParamVector) -> Result<OracleVerdict> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.evaluate_on(theta, &self.domain.scenarios)
    }

    fn evaluate_on(&self, theta: &ParamVector, scenarios: &[Scenario]) -> Result<OracleVerdict> {
        let mut margin = f64::INFINITY;
        let mut score_sum = 0.0;
        for s in scenarios {
            let tr = rollout(theta, s, self.domain.steps_per_traj, &self.physics)?;
            margin = margin.min(tr.min_clearance);
            score_sum += progress_score(&tr);
        }
        let score = score_sum / scenarios.len() as f64;
        Ok(OracleVerdict {
            safe: margin > 0.0,
            margin,
            score,
        })
    }

    /// Rollouts for the evaluation subset, for Lipschitz estimation.
    pub fn eval_trajectories(&self, theta: &ParamVector) -> Result<Vec<TrajectoryResult>> {
        self.domain
            .eval_scenarios()
            .iter()
            .map(|s| rollout(theta, s, self.domain.steps_per_traj, &self.physics))
            .collect()
    }
}

fn progress_score(tr: &TrajectoryResult) -> f64 {
    if tr.initial_distance <= 0.0 {
        return 0.0;
    }
    (1.0 - tr.final_distance / tr.initial_distance).max(0.0)
}

/// Candidate initialization for the controller search: weights i.i.d.
/// normal with per-group scales (W_in 0.8, b 1.2 per unit; W_rec and
/// W_out carry a 1/sqrt(n_hid) fan-in factor normalized at n_hid = 12)
/// and time constants uniform in [1.5, 3.0].
///
/// The large bias saturates the hidden state, which maximizes the
/// trajectory response to output-weight mutations while crushing the
/// time-constant sensitivity; the small output scale keeps the control
/// force below the level that would let a controller brake out of the
/// launch corridor. The fan-in factor keeps the recurrent spectral radius
/// and total control force dimension-independent, so margins and
/// calibrated mutation scales vary with dimension only through geometry.
pub fn random_candidate(arch: LtcArchitecture, rng: &mut RngStream) -> ParamVector {
    let fan = (12.0 / arch.n_hid as f64).sqrt();
    let mut theta = ParamVector::zeros(arch);
    for (kind, scale) in [
        (GroupKind::WIn, 0.8),
        (GroupKind::WRec, 0.4 * fan),
        (GroupKind::Bias, 1.2),
        (GroupKind::WOut, 0.05 * fan),
    ] {
        for v in theta.group_slice_mut(kind) {
            *v = scale * rng.normal();
        }
    }
    for t in theta.group_slice_mut(GroupKind::Tau) {
        *t = rng.uniform_in(1.5, 3.0);
    }
    theta
}

/// Search `candidates` random initializations for the best safety margin.
/// Deterministic: each candidate owns a child stream, ties break toward
/// the lower candidate index. Fails if no candidate has positive margin.
pub fn search_safe_controller(
    oracle: &Oracle,
    arch: LtcArchitecture,
    candidates: usize,
    rng: &RngStream,
) -> Result<(ParamVector, f64)> {
    if candidates == 0 {
        return Err(Error::InvalidArgument("candidates must be >= 1".into()));
    }
    let best = (0..candidates)
        .into_par_iter()
        .map(|i| {
            let mut child = rng.child_indexed("phase1-candidate", i as u64);
            let theta = random_candidate(arch, &mut child);
            let margin = oracle
                .evaluate(&theta)
                .map(|v| v.margin)
                .unwrap_or(f64::NEG_INFINITY);
            (i, margin, theta)
        })
        .reduce_with(|a, b| {
            // Max margin; ties go to the lower index.
            if (b.1, std::cmp::Reverse(b.0)) > (a.1, std::cmp::Reverse(a.0)) {
                b
            } else {
                a
            }
        })
        .expect("at least one candidate");
    if best.1 <= 0.0 {
        return Err(Error::SearchFailed { candidates });
    }
    Ok((best.2, best.1))
}

/// Wall-clock comparison of a gate check against the oracle.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CostProbe {
    pub gate_ms: f64,
    pub oracle_ms: f64,
    pub speedup: f64,
}

/// Median per-call cost of `gate` versus the oracle, over at least
/// `calls` samples of each. The gate is far below timer resolution, so
/// each gate sample times a batch and divides.
pub fn oracle_cost_probe<F: Fn(&ParamVector) -> bool>(
    oracle: &Oracle,
    gate: F,
    probes: &[ParamVector],
    calls: usize,
) -> Result<CostProbe> {
    assert!(!probes.is_empty());
    let calls = calls.max(100);
    const GATE_BATCH: usize = 256;

    let mut gate_samples = Vec::with_capacity(calls);
    let mut sink = 0usize;
    for s in 0..calls {
        let theta = &probes[s % probes.len()];
        let t0 = Instant::now();
        for _ in 0..GATE_BATCH {
            if gate(theta) {
                sink += 1;
            }
        }
        gate_samples.push(t0.elapsed().as_secs_f64() * 1e3 / GATE_BATCH as f64);
    }
    std::hint::black_box(sink);

    let mut oracle_samples = Vec::with_capacity(calls);
    for s in 0..calls {
        let theta = &probes[s % probes.len()];
        let t0 = Instant::now();
        std::hint::black_box(oracle.evaluate(theta)?);
        oracle_samples.push(t0.elapsed().as_secs_f64() * 1e3);
    }

    let gate_ms = median(&mut gate_samples);
    let oracle_ms = median(&mut oracle_samples);
    Ok(CostProbe {
        gate_ms,
        oracle_ms,
        speedup: oracle_ms / gate_ms.max(1e-12),
    })
}

fn median(samples: &mut [f64]) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).expect("timings are finite"));
    let n = samples.len();
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        0.5 * (samples[n / 2 - 1] + samples[n / 2])
    }
}
