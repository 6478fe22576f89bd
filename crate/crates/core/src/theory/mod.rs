//! Analytic kit: Neyman-Pearson Gaussian test, Hölder per-step bounds,
//! exact finite-horizon utility ceilings, Monte Carlo validation, and
//! decay-exponent fitting.
//!
//! The synthetic setting throughout is a Gaussian pair: safe samples
//! `~ N(mu, I_k)`, unsafe `~ N(0, I_k)`, with separation
//! `Delta_s = |mu|`. For that pair the optimal test at false-accept rate
//! `delta` achieves `TPR = Phi(Phi^{-1}(delta) + Delta_s)`, and the Rényi
//! divergence has the closed form `alpha * Delta_s^2 / 2`.

pub mod normal;
mod synthetic;

pub use normal::{erf, erfc, normal_cdf, normal_pdf, normal_quantile, normal_tail};
pub use synthetic::{synthetic_ds_experiment, ClassifierPoint, SyntheticConfig, SyntheticReport};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::RngStream;
use crate::{Error, Result};

/// Safe `~ N(mu, I)`, unsafe `~ N(0, I)` with `|mu| = separation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPair {
    pub dimension: usize,
    pub separation: f64,
}

impl GaussianPair {
    pub fn new(dimension: usize, separation: f64) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidArgument("dimension must be >= 1".into()));
        }
        if !(separation >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "separation must be >= 0, got {separation}"
            )));
        }
        Ok(Self {
            dimension,
            separation,
        })
    }

    /// Draw one sample of the given class. The mean sits on the first axis.
    pub fn sample(&self, safe: bool, rng: &mut RngStream) -> Vec<f64> {
        let mut x = rng.normal_vec(self.dimension, 1.0);
        if safe {
            x[0] += self.separation;
        }
        x
    }
}

/// Horizon, total risk budget, and separation for the utility ceiling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CeilingParams {
    pub horizon: usize,
    pub budget: f64,
    pub separation: f64,
}

impl CeilingParams {
    pub fn new(horizon: usize, budget: f64, separation: f64) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be >= 1".into()));
        }
        let per_step = budget / horizon as f64;
        if !(budget > 0.0) || per_step <= 0.0 || per_step >= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "budget {budget} over horizon {horizon} must give per-step rate in (0,1)"
            )));
        }
        if !(separation >= 0.0) {
            return Err(Error::InvalidArgument("separation must be >= 0".into()));
        }
        Ok(Self {
            horizon,
            budget,
            separation,
        })
    }
}

/// TPR of the Neyman-Pearson optimal test at false-accept rate `delta`.
pub fn tpr_np(delta: f64, separation: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!(
            "tpr_np requires delta in (0,1), got {delta}"
        )));
    }
    Ok(normal_cdf(normal_quantile(delta)? + separation))
}

/// Exact maximum cumulative TPR of any classifier over the horizon:
/// `U*(N, B) = N * TPR_NP(B/N)`.
pub fn ceiling(params: &CeilingParams) -> Result<f64> {
    let n = params.horizon as f64;
    Ok(n * tpr_np(params.budget / n, params.separation)?)
}

/// Rényi divergence of order `alpha` between the Gaussian pair's classes:
/// `alpha * Delta_s^2 / 2` (equal covariance, mean shift).
pub fn gaussian_renyi(alpha: f64, separation: f64) -> f64 {
    alpha * separation * separation / 2.0
}

/// Per-step Hölder bound `TPR <= C_a * delta^beta` with
/// `C_a = exp((alpha-1) * D_a / alpha)` and `beta = (alpha-1)/alpha`.
pub fn holder_bound(delta: f64, alpha: f64, d_alpha: f64) -> Result<f64> {
    let (c_alpha, beta) = holder_constants(alpha, d_alpha)?;
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Domain(format!(
            "holder bound requires delta in (0,1], got {delta}"
        )));
    }
    Ok(c_alpha * delta.powf(beta))
}

/// Hölder-Jensen finite-horizon upper bound `C_a * N^(1-beta) * B^beta`.
pub fn holder_jensen_upper(horizon: usize, budget: f64, alpha: f64, d_alpha: f64) -> Result<f64> {
    let (c_alpha, beta) = holder_constants(alpha, d_alpha)?;
    if horizon == 0 || !(budget > 0.0) {
        return Err(Error::Domain(
            "holder-jensen needs horizon >= 1 and budget > 0".into(),
        ));
    }
    let n = horizon as f64;
    Ok(c_alpha * n.powf(1.0 - beta) * budget.powf(beta))
}

fn holder_constants(alpha: f64, d_alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 1.0) {
        return Err(Error::Domain(format!("alpha must exceed 1, got {alpha}")));
    }
    if !(d_alpha >= 0.0) {
        return Err(Error::Domain("divergence must be nonnegative".into()));
    }
    let beta = (alpha - 1.0) / alpha;
    Ok(((beta * d_alpha).exp(), beta))
}

/// Least-squares decay exponent `p` of `delta_n ~ n^-p` from windowed
/// estimates `(n, delta)`. Zero or non-finite windows are skipped; `None`
/// when fewer than two usable points remain.
pub fn fit_decay_exponent(points: &[(f64, f64)]) -> Option<f64> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(n, d)| *n > 0.0 && *d > 0.0 && d.is_finite())
        .map(|&(n, d)| (n.ln(), -d.ln()))
        .collect();
    if usable.len() < 2 {
        return None;
    }
    let n = usable.len() as f64;
    let mean_x = usable.iter().map(|(x, _)| x).sum::<f64>() / n;
    let mean_y = usable.iter().map(|(_, y)| y).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in usable {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    if sxx <= 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// Monte Carlo estimate of the cumulative TPR of the NP gate run at
/// per-step budget `B/N` for `N` steps.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct McCeilingEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub trials: usize,
}

/// Simulate the gate `trials` times on fresh safe samples of a
/// `dimension`-variate Gaussian pair. Counting is integer per trial, so
/// parallel reduction stays deterministic.
pub fn monte_carlo_ceiling(
    params: &CeilingParams,
    dimension: usize,
    trials: usize,
    rng: &RngStream,
) -> Result<McCeilingEstimate> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    let pair = GaussianPair::new(dimension, params.separation)?;
    let delta = params.budget / params.horizon as f64;
    // NP acceptance region for mu on the first axis: x[0] > z_{1-delta}.
    // At separation 0 this stays a valid delta-level test.
    let threshold = normal_quantile(1.0 - delta)?;
    let counts: Vec<u64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut child = rng.child_indexed("mc-ceiling-trial", t as u64);
            let mut accepted = 0u64;
            for _ in 0..params.horizon {
                let x = pair.sample(true, &mut child);
                if x[0] > threshold {
                    accepted += 1;
                }
            }
            accepted
        })
        .collect();
    let sum: u64 = counts.iter().sum();
    let mean = sum as f64 / trials as f64;
    let var = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / (trials.saturating_sub(1)).max(1) as f64;
    let std_err = if trials > 1 {
        (var / trials as f64).sqrt()
    } else {
        0.0
    };
    Ok(McCeilingEstimate {
        mean,
        std_err,
        trials,
    })
}
