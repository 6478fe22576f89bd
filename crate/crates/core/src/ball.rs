//! The Lipschitz ball verifier and everything built on it: construction
//! from a margin and a Lipschitz constant, the pure `O(d)` membership
//! check, soundness audits, mutation-scale calibration, the ball-gated
//! loop, directed in-ball improvement, and ball chaining.
//!
//! Soundness comes from `L * |theta - theta0| < m`: every point strictly
//! inside the ball keeps a positive safety margin, so the gate never
//! needs the oracle to decide.

use serde::Serialize;
use std::path::Path;

use rayon::prelude::*;

use crate::gates::{run_gated_loop, Gate, GateDecision, GateTrace};
use crate::lipschitz::{estimate_empirical, EmpiricalOptions, LipschitzEstimate};
use crate::oracle::Oracle;
use crate::params::{gaussian_mutation, ParamVector};
use crate::rng::RngStream;
use crate::{Error, Result};

/// A verified region: everything strictly within `radius` of `center` is
/// safe on the referenced operating domain.
#[derive(Debug, Clone, Serialize)]
pub struct Ball {
    pub center: ParamVector,
    pub radius: f64,
    pub margin: f64,
    pub lipschitz: LipschitzEstimate,
    pub domain_id: String,
}

// ParamVector carries its architecture; serialize the ball as provenance
// plus the flat center values.
impl Serialize for ParamVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("ParamVector", 2)?;
        st.serialize_field("arch", &self.arch)?;
        st.serialize_field("values", &self.values)?;
        st.end()
    }
}

/// Build the ball `r = m / L_cons` around an oracle-verified center.
/// Refused when the center's margin is not strictly positive.
pub fn construct_ball(
    theta0: &ParamVector,
    oracle: &Oracle,
    lipschitz: LipschitzEstimate,
) -> Result<Ball> {
    let verdict = oracle.evaluate(theta0)?;
    if verdict.margin <= 0.0 {
        return Err(Error::NonPositiveMargin {
            margin: verdict.margin,
        });
    }
    Ok(Ball {
        center: theta0.clone(),
        radius: verdict.margin / lipschitz.l_cons,
        margin: verdict.margin,
        lipschitz,
        domain_id: oracle.domain.content_id(),
    })
}

impl Ball {
    /// Strict Euclidean membership test; never touches the oracle.
    pub fn check(&self, theta: &ParamVector) -> Result<GateDecision> {
        let dist = self.center.euclidean_distance(theta)?;
        Ok(if dist < self.radius {
            GateDecision::Accept
        } else {
            GateDecision::Reject
        })
    }

    pub fn distance_from_center(&self, theta: &ParamVector) -> Result<f64> {
        self.center.euclidean_distance(theta)
    }

    /// Provenance record for the ball file (pairs with the binary center).
    pub fn provenance_json(&self) -> serde_json::Value {
        serde_json::json!({
            "arch": self.center.arch,
            "radius": self.radius,
            "margin": self.margin,
            "lipschitz": self.lipschitz,
            "domain_id": self.domain_id,
        })
    }

    /// Write `<stem>.json` provenance and `<stem>.bin` center record.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let json =
            serde_json::to_string_pretty(&self.provenance_json()).expect("provenance serializes");
        std::fs::write(dir.join(format!("{stem}.json")), json)?;
        let mut buf = Vec::new();
        self.center.write_binary(&mut buf)?;
        std::fs::write(dir.join(format!("{stem}.bin")), buf)?;
        Ok(())
    }
}

/// Uniform sample from the open ball: uniform direction, radius scaled by
/// `u^(1/d)`.
pub fn sample_in_ball(ball: &Ball, rng: &mut RngStream) -> ParamVector {
    sample_at_radius(
        ball,
        ball.radius * rng.uniform().powf(1.0 / ball.center.dimension() as f64),
        rng,
    )
}

/// Sample strictly outside the ball, in the shell `(r, 2r]`.
pub fn sample_outside_ball(ball: &Ball, rng: &mut RngStream) -> ParamVector {
    sample_at_radius(ball, ball.radius * (1.0 + rng.uniform().max(1e-9)), rng)
}

fn sample_at_radius(ball: &Ball, radius: f64, rng: &mut RngStream) -> ParamVector {
    let d = ball.center.dimension();
    let mut dir = rng.normal_vec(d, 1.0);
    let n = crate::linalg::normalize_in_place(&mut dir);
    if n == 0.0 {
        return ball.center.clone();
    }
    let mut theta = ball.center.clone();
    for (v, dv) in theta.values.iter_mut().zip(&dir) {
        *v += radius * dv;
    }
    theta
}

#[derive(Debug, Clone, Serialize)]
pub struct SoundnessReport {
    pub n_inside: usize,
    pub inside_unsafe: usize,
    pub unsafe_indices: Vec<usize>,
    pub n_outside: usize,
    pub outside_safe: usize,
    pub mean_radial_fraction: f64,
}

impl SoundnessReport {
    pub fn sound(&self) -> bool {
        self.inside_unsafe == 0
    }
}

/// Oracle-audit uniform in-ball samples (must all be safe for a sound
/// ball) and shell samples just outside (informational).
pub fn soundness_audit(
    ball: &Ball,
    oracle: &Oracle,
    n_inside: usize,
    n_outside: usize,
    rng: &RngStream,
) -> Result<SoundnessReport> {
    let inside: Vec<(usize, bool, f64)> = (0..n_inside)
        .into_par_iter()
        .map(|i| -> Result<(usize, bool, f64)> {
            let mut child = rng.child_indexed("audit-inside", i as u64);
            let theta = sample_in_ball(ball, &mut child);
            let frac = ball.distance_from_center(&theta)? / ball.radius;
            Ok((i, oracle.evaluate(&theta)?.safe, frac))
        })
        .collect::<Result<Vec<_>>>()?;
    let outside_safe = (0..n_outside)
        .into_par_iter()
        .map(|i| -> Result<u64> {
            let mut child = rng.child_indexed("audit-outside", i as u64);
            let theta = sample_outside_ball(ball, &mut child);
            Ok(oracle.evaluate(&theta)?.safe as u64)
        })
        .collect::<Result<Vec<_>>>()?
        .iter()
        .sum::<u64>() as usize;

    let mut unsafe_indices: Vec<usize> = inside
        .iter()
        .filter(|(_, safe, _)| !safe)
        .map(|(i, _, _)| *i)
        .collect();
    unsafe_indices.sort_unstable();
    let mean_radial_fraction = if n_inside == 0 {
        0.0
    } else {
        inside.iter().map(|(_, _, f)| f).sum::<f64>() / n_inside as f64
    };
    Ok(SoundnessReport {
        n_inside,
        inside_unsafe: unsafe_indices.len(),
        unsafe_indices,
        n_outside,
        outside_safe,
        mean_radial_fraction,
    })
}

/// The ball as a [`Gate`] for the gated loop.
pub struct BallGate<'a> {
    pub ball: &'a Ball,
}

impl Gate for BallGate<'_> {
    fn decide(&mut self, theta: &ParamVector) -> GateDecision {
        self.ball.check(theta).unwrap_or(GateDecision::Reject)
    }
    fn name(&self) -> String {
        format!("ball-{}", self.ball.lipschitz.method.name())
    }
}

/// Mutation scale at which fresh center proposals land in-ball about half
/// the time: bisection until acceptance over 200 probes sits in
/// [45%, 55%]. Probe norms are fixed across bisection iterations, so
/// acceptance is exactly monotone in sigma.
pub fn calibrate_sigma_star(ball: &Ball, probes: usize, rng: &RngStream) -> f64 {
    let d = ball.center.dimension();
    let mut norm_rng = rng.child("sigma-star-probes");
    let norms: Vec<f64> = (0..probes.max(1))
        .map(|_| crate::linalg::norm2(&norm_rng.normal_vec(d, 1.0)))
        .collect();
    let acceptance = |sigma: f64| -> f64 {
        norms.iter().filter(|&&n| sigma * n < ball.radius).count() as f64 / norms.len() as f64
    };
    let mut lo = ball.radius / (4.0 * (d as f64).sqrt());
    let mut hi = ball.radius * 4.0 / (d as f64).sqrt();
    while acceptance(lo) < 0.55 {
        lo /= 2.0;
    }
    while acceptance(hi) > 0.45 {
        hi *= 2.0;
    }
    let mut mid = (lo * hi).sqrt();
    for _ in 0..200 {
        let a = acceptance(mid);
        if (0.45..=0.55).contains(&a) {
            break;
        }
        if a > 0.55 {
            lo = mid;
        } else {
            hi = mid;
        }
        mid = (lo * hi).sqrt();
    }
    mid
}

/// Mutation scale for the gated loop itself: the accepted random walk must
/// stay inside the ball for most of its `n_steps`, so the scale sits well
/// below the single-proposal `sigma*`. Halving scan from `sigma*` until
/// simulated loop acceptance reaches `target`.
pub fn calibrate_loop_sigma(ball: &Ball, n_steps: usize, target: f64, rng: &RngStream) -> f64 {
    let mut sigma = calibrate_sigma_star(ball, 200, &rng.child("star"));
    for round in 0..60 {
        let mut sim_rng = rng.child_indexed("loop-sim", round);
        let mut theta = ball.center.clone();
        let mut accepted = 0usize;
        for _ in 0..n_steps {
            let proposal = gaussian_mutation(&theta, sigma, &mut sim_rng);
            if ball
                .check(&proposal)
                .map(|d| d.is_accept())
                .unwrap_or(false)
            {
                accepted += 1;
                theta = proposal;
            }
        }
        if accepted as f64 / n_steps.max(1) as f64 >= target {
            return sigma;
        }
        sigma /= 1.4;
    }
    sigma
}

/// Ball-gated self-improvement: mutate, check, advance on accepted safe
/// proposals; the oracle only measures.
pub fn gated_loop(
    ball: &Ball,
    oracle: &Oracle,
    sigma: f64,
    n_steps: usize,
    window: usize,
    rng: &mut RngStream,
) -> Result<GateTrace> {
    let mut gate = BallGate { ball };
    run_gated_loop(&mut gate, oracle, &ball.center, sigma, n_steps, window, rng)
}

#[derive(Debug, Clone, Serialize)]
pub struct DirectedStep {
    pub step: usize,
    pub score: f64,
    pub displacement: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DirectedTrace {
    pub initial_score: f64,
    pub final_score: f64,
    pub improvement: f64,
    pub relative_improvement: f64,
    pub accepted_steps: usize,
    pub false_accepts: usize,
    pub final_displacement: f64,
    pub max_displacement: f64,
    pub step_size: f64,
    pub steps: Vec<DirectedStep>,
}

/// Symmetric finite-difference gradient estimate of the oracle score,
/// averaged over `probes` random unit directions.
fn fd_score_gradient(
    oracle: &Oracle,
    theta: &ParamVector,
    probes: usize,
    eps: f64,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let d = theta.dimension();
    let mut grad = vec![0.0; d];
    for _ in 0..probes {
        let mut dir = rng.normal_vec(d, 1.0);
        if crate::linalg::normalize_in_place(&mut dir) == 0.0 {
            continue;
        }
        let mut plus = theta.clone();
        let mut minus = theta.clone();
        for ((p, m), dv) in plus
            .values
            .iter_mut()
            .zip(minus.values.iter_mut())
            .zip(&dir)
        {
            *p += eps * dv;
            *m -= eps * dv;
        }
        let df = (oracle.evaluate(&plus)?.score - oracle.evaluate(&minus)?.score) / (2.0 * eps);
        for (g, dv) in grad.iter_mut().zip(&dir) {
            *g += df * dv / probes as f64;
        }
    }
    Ok(grad)
}

/// Gradient-guided improvement inside the ball.
///
/// Per step: finite-difference gradient of the score, a step of
/// `r / (2 sqrt(d))` along it, projection back to the 0.95r sphere when
/// exceeded, and acceptance only of in-ball proposals with nondecreasing
/// score. Every accepted proposal is oracle-audited; with a sound ball
/// the false-accept count stays zero.
pub fn directed_improve(
    ball: &Ball,
    oracle: &Oracle,
    steps: usize,
    fd_probes: usize,
    rng: &RngStream,
) -> Result<DirectedTrace> {
    const FD_EPS: f64 = 1e-4;
    const PROJECTION: f64 = 0.95;
    let d = ball.center.dimension() as f64;
    let step_size = ball.radius / (2.0 * d.sqrt());

    let initial_score = oracle.evaluate(&ball.center)?.score;
    let mut theta = ball.center.clone();
    let mut score = initial_score;
    let mut trace = Vec::with_capacity(steps);
    let mut accepted_steps = 0usize;
    let mut false_accepts = 0usize;
    let mut max_displacement = 0.0f64;

    for step in 1..=steps {
        let mut step_rng = rng.child_indexed("directed-step", step as u64);
        let grad = fd_score_gradient(oracle, &theta, fd_probes, FD_EPS, &mut step_rng)?;
        let gnorm = crate::linalg::norm2(&grad);
        if gnorm == 0.0 {
            // Flat score: stay put.
            trace.push(DirectedStep {
                step,
                score,
                displacement: ball.distance_from_center(&theta)?,
                accepted: false,
            });
            continue;
        }
        let mut proposal = theta.clone();
        for (v, g) in proposal.values.iter_mut().zip(&grad) {
            *v += step_size * g / gnorm;
        }
        let dist = ball.distance_from_center(&proposal)?;
        if dist > PROJECTION * ball.radius {
            let scale = PROJECTION * ball.radius / dist;
            for (v, c) in proposal.values.iter_mut().zip(&ball.center.values) {
                *v = c + (*v - c) * scale;
            }
        }
        let in_ball = ball.check(&proposal)?.is_accept();
        let verdict = oracle.evaluate(&proposal)?;
        let accepted = in_ball && verdict.score >= score;
        if accepted {
            if verdict.safe {
                theta = proposal;
                score = verdict.score;
                accepted_steps += 1;
            } else {
                false_accepts += 1;
            }
        }
        let displacement = ball.distance_from_center(&theta)?;
        max_displacement = max_displacement.max(displacement);
        trace.push(DirectedStep {
            step,
            score,
            displacement,
            accepted,
        });
    }

    let final_displacement = ball.distance_from_center(&theta)?;
    Ok(DirectedTrace {
        initial_score,
        final_score: score,
        improvement: score - initial_score,
        relative_improvement: if initial_score > 0.0 {
            (score - initial_score) / initial_score
        } else {
            0.0
        },
        accepted_steps,
        false_accepts,
        final_displacement,
        max_displacement,
        step_size,
        steps: trace,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainRecord {
    pub index: usize,
    pub score: f64,
    pub margin: f64,
    pub lipschitz_raw: f64,
    pub radius: f64,
    pub displacement: f64,
    pub false_accepts: usize,
    pub accepted: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainRun {
    pub records: Vec<ChainRecord>,
    pub initial_score: f64,
    pub final_score: f64,
    pub improvement: f64,
    pub relative_improvement: f64,
    pub total_displacement: f64,
    pub first_radius: f64,
    pub truncated: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ChainOptions {
    pub k_chains: usize,
    pub inner_steps: usize,
    pub fd_probes: usize,
    pub lipschitz: EmpiricalOptions,
}

impl Default for ChainOptions {
    fn default() -> Self {
        Self {
            k_chains: 10,
            inner_steps: 50,
            fd_probes: 10,
            lipschitz: EmpiricalOptions {
                n_random: 100,
                n_axis: 20,
                ..Default::default()
            },
        }
    }
}

/// Ball chaining: re-verify margin and Lipschitz constant at each chain,
/// run directed steps within the fresh ball, advance to the best accepted
/// proposal, and re-verify D-safety before the next chain. Re-verification
/// uses the oracle's own safety definition (the fixed evaluation subset,
/// which is what the margins and radii certify). A failed re-verification
/// truncates the run with a report rather than silently continuing.
pub fn chain(
    theta0: &ParamVector,
    oracle: &Oracle,
    opts: &ChainOptions,
    rng: &RngStream,
) -> Result<ChainRun> {
    const FD_EPS: f64 = 1e-4;
    const PROJECTION: f64 = 0.95;
    let d = theta0.dimension() as f64;

    let initial = oracle.evaluate(theta0)?;
    if initial.margin <= 0.0 {
        return Err(Error::NonPositiveMargin {
            margin: initial.margin,
        });
    }
    let initial_score = initial.score;
    let mut theta = theta0.clone();
    let mut score = initial_score;
    let mut records: Vec<ChainRecord> = Vec::with_capacity(opts.k_chains);
    let mut truncated = None;

    for k in 0..opts.k_chains {
        let chain_rng = rng.child_indexed("chain", k as u64);
        let margin_k = oracle.evaluate(&theta)?.margin;
        if margin_k <= 0.0 {
            truncated = Some(format!("chain {k}: margin {margin_k} not positive"));
            break;
        }
        let est = estimate_empirical(
            &theta,
            oracle,
            &opts.lipschitz,
            &chain_rng.child("lipschitz"),
        )?;
        let radius = margin_k / est.l_cons;
        let step_size = radius / (2.0 * d.sqrt());
        let center = theta.clone();

        let mut cur = center.clone();
        let mut cur_score = score;
        let mut best: Option<(f64, usize, ParamVector)> = None;
        let mut false_accepts = 0usize;
        let mut accepted = 0usize;

        for j in 1..=opts.inner_steps {
            let mut step_rng = chain_rng.child_indexed("inner", j as u64);
            let grad = fd_score_gradient(oracle, &cur, opts.fd_probes, FD_EPS, &mut step_rng)?;
            let gnorm = crate::linalg::norm2(&grad);
            if gnorm == 0.0 {
                continue;
            }
            let mut proposal = cur.clone();
            for (v, g) in proposal.values.iter_mut().zip(&grad) {
                *v += step_size * g / gnorm;
            }
            let dist = center.euclidean_distance(&proposal)?;
            if dist > PROJECTION * radius {
                let scale = PROJECTION * radius / dist;
                for (v, c) in proposal.values.iter_mut().zip(&center.values) {
                    *v = c + (*v - c) * scale;
                }
            }
            // The O(d) gate check against this chain's ball.
            if center.euclidean_distance(&proposal)? >= radius {
                continue;
            }
            let verdict = oracle.evaluate(&proposal)?; // measurement
            if verdict.score < cur_score {
                continue;
            }
            accepted += 1;
            if !verdict.safe {
                false_accepts += 1;
                continue;
            }
            cur = proposal.clone();
            cur_score = verdict.score;
            let better = best
                .as_ref()
                .map(|(s, _, _)| verdict.score > *s)
                .unwrap_or(true);
            if better {
                best = Some((verdict.score, j, proposal));
            }
        }

        let (next_score, next_theta) = match best {
            Some((s, _, t)) => (s, t),
            None => (score, theta.clone()),
        };

        // Re-verify D-safety before committing the transition.
        let reverify = oracle.evaluate(&next_theta)?;
        if reverify.margin <= 0.0 {
            truncated = Some(format!(
                "chain {k}: re-verification margin {} not positive",
                reverify.margin
            ));
            break;
        }

        theta = next_theta;
        score = next_score;
        records.push(ChainRecord {
            index: k,
            score,
            margin: margin_k,
            lipschitz_raw: est.l_raw,
            radius,
            displacement: theta0.euclidean_distance(&theta)?,
            false_accepts,
            accepted,
        });
    }

    let total_displacement = theta0.euclidean_distance(&theta)?;
    Ok(ChainRun {
        first_radius: records.first().map(|r| r.radius).unwrap_or(0.0),
        initial_score,
        final_score: score,
        improvement: score - initial_score,
        relative_improvement: if initial_score > 0.0 {
            (score - initial_score) / initial_score
        } else {
            0.0
        },
        total_displacement,
        truncated,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env2d::PhysicsConfig;
    use crate::lipschitz::LipschitzMethod;
    use crate::oracle::{search_safe_controller, OperatingDomain};
    use crate::params::LtcArchitecture;

    fn small_oracle() -> Oracle {
        let domain = OperatingDomain::generate(10, 12345, 200, 6).unwrap();
        Oracle::new(domain, PhysicsConfig::default())
    }

    fn fixed_estimate(l: f64) -> LipschitzEstimate {
        LipschitzEstimate::new(LipschitzMethod::Empirical, l / 2.5, 2.5, 1, vec![])
    }

    fn small_ball(oracle: &Oracle) -> Ball {
        let rng = RngStream::new(42);
        let arch = LtcArchitecture::new(4, 6, 2).unwrap();
        let (theta0, _) = search_safe_controller(oracle, arch, 80, &rng).unwrap();
        let est = estimate_empirical(
            &theta0,
            oracle,
            &EmpiricalOptions {
                n_random: 30,
                n_axis: 10,
                ..Default::default()
            },
            &rng.child("lipschitz"),
        )
        .unwrap();
        construct_ball(&theta0, oracle, est).unwrap()
    }

    #[test]
    fn radius_formula_matches_reference() {
        // m / L at the reference construction values.
        assert!((0.3260_f64 / 44.57 - 0.00731).abs() < 1e-5);
        let oracle = small_oracle();
        let rng = RngStream::new(42);
        let arch = LtcArchitecture::new(4, 6, 2).unwrap();
        let (theta0, margin) = search_safe_controller(&oracle, arch, 80, &rng).unwrap();
        let ball = construct_ball(&theta0, &oracle, fixed_estimate(1.0)).unwrap();
        assert_eq!(ball.radius, margin); // m / 1
        let ball2 = construct_ball(&theta0, &oracle, fixed_estimate(2.0)).unwrap();
        assert_eq!(ball2.radius, ball.radius / 2.0); // doubling L halves r
    }

    #[test]
    fn construction_refuses_nonpositive_margin() {
        let oracle = small_oracle();
        // A controller driving hard in a fixed direction will hit
        // something across 4 scenarios; find one that is unsafe.
        let rng = RngStream::new(3);
        let arch = LtcArchitecture::new(4, 6, 2).unwrap();
        let unsafe_theta = (0..200)
            .find_map(|i| {
                let mut child = rng.child_indexed("unsafe", i);
                let theta = crate::oracle::random_candidate(arch, &mut child);
                let v = oracle.evaluate(&theta).unwrap();
                (!v.safe).then_some(theta)
            })
            .expect("an unsafe candidate exists");
        let err = construct_ball(&unsafe_theta, &oracle, fixed_estimate(1.0));
        assert!(matches!(err, Err(Error::NonPositiveMargin { .. })));
    }

    #[test]
    fn check_is_strict_at_the_boundary() {
        // Exact arithmetic: unit ball around the origin.
        let arch = LtcArchitecture::new(4, 6, 2).unwrap();
        let ball = Ball {
            center: ParamVector::zeros(arch),
            radius: 1.0,
            margin: 1.0,
            lipschitz: fixed_estimate(1.0),
            domain_id: "test".into(),
        };
        assert!(ball.check(&ball.center).unwrap().is_accept());

        let mut boundary = ParamVector::zeros(arch);
        boundary.values[0] = 1.0; // distance exactly r
        assert!(!ball.check(&boundary).unwrap().is_accept());

        let mut inside = ParamVector::zeros(arch);
        inside.values[0] = 1.0 - 1e-12;
        assert!(ball.check(&inside).unwrap().is_accept());

        let wrong_dim = ParamVector::zeros(LtcArchitecture::new(4, 12, 2).unwrap());
        assert!(ball.check(&wrong_dim).is_err());

        // And on a searched ball, points scaled just inside/outside.
        let oracle = small_oracle();
        let searched = small_ball(&oracle);
        assert!(searched.check(&searched.center).unwrap().is_accept());
        let mut out = searched.center.clone();
        out.values[0] += searched.radius * 1.01;
        assert!(!searched.check(&out).unwrap().is_accept());
    }

    #[test]
    fn check_never_calls_oracle() {
        let oracle = small_oracle();
        let ball = small_ball(&oracle);
        let mut rng = RngStream::new(9);
        let before = oracle.calls();
        for _ in 0..1000 {
            let theta = sample_in_ball(&ball, &mut rng);
            let _ = ball.check(&theta).unwrap();
        }
        assert_eq!(oracle.calls(), before);
    }

    #[test]
    fn in_ball_samples_are_inside_with_correct_radial_mean() {
        let oracle = small_oracle();
        let ball = small_ball(&oracle);
        let d = ball.center.dimension() as f64;
        let mut rng = RngStream::new(5);
        let mut fracs = Vec::new();
        for _ in 0..400 {
            let theta = sample_in_ball(&ball, &mut rng);
            let frac = ball.distance_from_center(&theta).unwrap() / ball.radius;
            assert!(frac < 1.0);
            fracs.push(frac);
        }
        let mean = fracs.iter().sum::<f64>() / fracs.len() as f64;
        // Uniform-ball radial mean d/(d+1); both the value and a
        // rejection-sampling oracle at d=3 pin the sampler (see below).
        assert!((mean - d / (d + 1.0)).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn radial_law_matches_rejection_sampling_in_3d() {
        // Rejection-sample uniform points in the unit 3-ball and compare
        // the radial mean with the u^(1/d) sampler's law.
        let mut rng = RngStream::new(8);
        let mut sum = 0.0;
        let mut count = 0usize;
        while count < 20_000 {
            let p = [
                rng.uniform_in(-1.0, 1.0),
                rng.uniform_in(-1.0, 1.0),
                rng.uniform_in(-1.0, 1.0),
            ];
            let r2 = p.iter().map(|v| v * v).sum::<f64>();
            if r2 <= 1.0 {
                sum += r2.sqrt();
                count += 1;
            }
        }
        let rejection_mean = sum / count as f64;
        let mut law_sum = 0.0;
        for _ in 0..20_000 {
            law_sum += rng.uniform().powf(1.0 / 3.0);
        }
        let law_mean = law_sum / 20_000.0;
        assert!((rejection_mean - 0.75).abs() < 0.01, "{rejection_mean}");
        assert!((law_mean - rejection_mean).abs() < 0.01);
    }

    #[test]
    fn accepted_points_satisfy_the_soundness_inequality() {
        // For a ball with a valid Lipschitz constant, any in-ball theta
        // keeps margin(theta) > m - L_cons * |theta - theta0|.
        let oracle = small_oracle();
        let rng = RngStream::new(42);
        let arch = LtcArchitecture::new(4, 6, 2).unwrap();
        let (theta0, _) = search_safe_controller(&oracle, arch, 80, &rng).unwrap();
        let est = crate::lipschitz::trajectory_sensitivity_bound(&theta0, &oracle, None).unwrap();
        let ball = construct_ball(&theta0, &oracle, est).unwrap();
        let mut sample_rng = rng.child("soundness-samples");
        for _ in 0..40 {
            let theta = sample_in_ball(&ball, &mut sample_rng);
            let dist = ball.distance_from_center(&theta).unwrap();
            let verdict = oracle.evaluate(&theta).unwrap();
            let floor = ball.margin - ball.lipschitz.l_cons * dist;
            assert!(
                verdict.margin > floor - 1e-9,
                "margin {} below floor {floor}",
                verdict.margin
            );
            assert!(verdict.safe);
        }
    }

    #[test]
    fn zero_radius_audit_is_trivially_safe() {
        let oracle = small_oracle();
        let mut ball = small_ball(&oracle);
        ball.radius = 0.0;
        let report = soundness_audit(&ball, &oracle, 20, 0, &RngStream::new(1)).unwrap();
        assert_eq!(report.inside_unsafe, 0);
        assert!(report.sound());
    }

    #[test]
    fn sigma_star_gives_half_acceptance_from_center() {
        let oracle = small_oracle();
        let ball = small_ball(&oracle);
        let rng = RngStream::new(11);
        let sigma = calibrate_sigma_star(&ball, 200, &rng);
        // Fresh probes at the calibrated scale: acceptance near 50%.
        let mut probe_rng = rng.child("fresh-probes");
        let mut acc = 0;
        for _ in 0..400 {
            let proposal = gaussian_mutation(&ball.center, sigma, &mut probe_rng);
            if ball.check(&proposal).unwrap().is_accept() {
                acc += 1;
            }
        }
        let rate = acc as f64 / 400.0;
        assert!((0.35..=0.65).contains(&rate), "rate {rate}");
    }

    #[test]
    fn loop_sigma_keeps_walk_inside() {
        let oracle = small_oracle();
        let ball = small_ball(&oracle);
        let rng = RngStream::new(13);
        let sigma = calibrate_loop_sigma(&ball, 200, 0.92, &rng);
        let mut loop_rng = rng.child("verify");
        let mut theta = ball.center.clone();
        let mut accepted = 0;
        for _ in 0..200 {
            let p = gaussian_mutation(&theta, sigma, &mut loop_rng);
            if ball.check(&p).unwrap().is_accept() {
                accepted += 1;
                theta = p;
            }
        }
        assert!(accepted >= 160, "accepted {accepted}/200");
    }

    #[test]
    fn mismatched_sigma_rejects_everything() {
        let oracle = small_oracle();
        let ball = small_ball(&oracle);
        // sigma = 0.01 has |d theta| ~ 0.09 across d=84, far beyond a
        // millimetric radius whenever L is moderate; if the radius is
        // larger than that the scale comparison is skipped.
        if 0.01 * (84.0f64).sqrt() > 2.0 * ball.radius {
            let mut rng = RngStream::new(17);
            let trace = gated_loop(
                &ball,
                &oracle,
                0.01,
                50,
                crate::gates::DEFAULT_WINDOW,
                &mut rng,
            )
            .unwrap();
            assert_eq!(trace.acceptance_rate(), 0.0);
        }
    }
}
