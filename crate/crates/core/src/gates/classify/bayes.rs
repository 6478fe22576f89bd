//! Gaussian Bayes classifier with a full covariance per class.
//!
//! The per-class covariance is Ledoit-Wolf shrunk toward its spherical
//! target, which keeps the plug-in discriminant near the population
//! optimum when samples are scarce relative to the dimension. Estimates
//! that still fail to factor get an automatic escalating ridge; the
//! applied ridge is surfaced to the caller as a warning flag.

use super::Standardizer;
use crate::gates::features::LabeledDataset;
use crate::linalg::{cholesky_log_det, cholesky_solve, cholesky_with_ridge, Matrix};
use crate::Result;

#[derive(Debug, Clone)]
struct ClassDensity {
    mean: Vec<f64>,
    chol: Matrix,
    log_det: f64,
    log_prior: f64,
}

impl ClassDensity {
    fn log_likelihood(&self, z: &[f64]) -> f64 {
        let centered: Vec<f64> = z.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        let solved = cholesky_solve(&self.chol, &centered);
        let maha = crate::linalg::dot(&centered, &solved);
        self.log_prior - 0.5 * (maha + self.log_det)
    }
}

#[derive(Debug, Clone)]
pub struct BayesModel {
    standardizer: Standardizer,
    safe: ClassDensity,
    unsafe_: ClassDensity,
    ridge_applied: bool,
}

impl BayesModel {
    pub fn fit(dataset: &LabeledDataset) -> Result<Self> {
        let standardizer = Standardizer::fit(&dataset.features);
        let rows = standardizer.apply_all(&dataset.features);
        let k = dataset.width();
        let mut ridge_applied = false;
        let mut density = |label: bool| -> Result<ClassDensity> {
            let class_rows: Vec<&Vec<f64>> = rows
                .iter()
                .zip(&dataset.labels)
                .filter(|(_, &l)| l == label)
                .map(|(r, _)| r)
                .collect();
            let n_c = class_rows.len();
            let mut mean = vec![0.0; k];
            for row in &class_rows {
                for (m, v) in mean.iter_mut().zip(row.iter()) {
                    *m += v;
                }
            }
            for m in &mut mean {
                *m /= n_c as f64;
            }
            let mut cov = Matrix::zeros(k, k);
            let mut sq_norm_sum = 0.0; // sum over samples of |x - mean|^4
            let mut quad_sum = 0.0; // sum of (x - mean)^T S (x - mean), filled below
            let centered_rows: Vec<Vec<f64>> = class_rows
                .iter()
                .map(|row| row.iter().zip(&mean).map(|(a, b)| a - b).collect())
                .collect();
            if n_c >= 2 {
                for centered in &centered_rows {
                    for i in 0..k {
                        for j in 0..=i {
                            *cov.at_mut(i, j) += centered[i] * centered[j];
                        }
                    }
                }
                // MLE normalization (1/n) as the Ledoit-Wolf formulas use.
                for i in 0..k {
                    for j in 0..=i {
                        let v = cov.at(i, j) / n_c as f64;
                        *cov.at_mut(i, j) = v;
                        *cov.at_mut(j, i) = v;
                    }
                }
                // Ledoit-Wolf shrinkage toward mu*I with
                // gamma = min(1, (mean |x x^T - S|_F^2 / n) / |S - mu I|_F^2).
                let mu = (0..k).map(|i| cov.at(i, i)).sum::<f64>() / k as f64;
                let s_norm_sq = cov.frobenius().powi(2);
                let d_sq = s_norm_sq - 2.0 * mu * (0..k).map(|i| cov.at(i, i)).sum::<f64>()
                    + k as f64 * mu * mu;
                for centered in &centered_rows {
                    let nrm2 = crate::linalg::dot(centered, centered);
                    sq_norm_sum += nrm2 * nrm2;
                    let sx = cov.matvec(centered);
                    quad_sum += crate::linalg::dot(centered, &sx);
                }
                let n_f = n_c as f64;
                let b_bar_sq =
                    ((sq_norm_sum - 2.0 * quad_sum) / n_f + s_norm_sq) / n_f;
                if d_sq > 1e-300 {
                    let gamma = (b_bar_sq / d_sq).clamp(0.0, 1.0);
                    for i in 0..k {
                        for j in 0..k {
                            let target = if i == j { mu } else { 0.0 };
                            let v = (1.0 - gamma) * cov.at(i, j) + gamma * target;
                            *cov.at_mut(i, j) = v;
                        }
                    }
                }
            }
            let trace: f64 = (0..k).map(|i| cov.at(i, i)).sum();
            let base_ridge = (trace / k as f64).max(1.0) * 1e-9;
            let (chol, ridge) = cholesky_with_ridge(&cov, base_ridge)?;
            if ridge > 0.0 {
                ridge_applied = true;
            }
            Ok(ClassDensity {
                mean,
                log_det: cholesky_log_det(&chol),
                chol,
                log_prior: (n_c as f64 / rows.len() as f64).ln(),
            })
        };
        let safe = density(true)?;
        let unsafe_ = density(false)?;
        Ok(Self {
            standardizer,
            safe,
            unsafe_,
            ridge_applied,
        })
    }

    pub fn ridge_applied(&self) -> bool {
        self.ridge_applied
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        let z = self.standardizer.apply(x);
        self.safe.log_likelihood(&z) > self.unsafe_.log_likelihood(&z)
    }
}
