//! Linear SVM trained by deterministic epoch-based subgradient descent on
//! the primal hinge objective `|w|^2/2 + C * mean hinge`, learning rate
//! `1/(C*t)` at epoch `t`. No solver dependency, bit-reproducible.

use super::Standardizer;
use crate::gates::features::LabeledDataset;

#[derive(Debug, Clone)]
pub struct SvmModel {
    standardizer: Standardizer,
    weights: Vec<f64>,
    bias: f64,
}

impl SvmModel {
    pub fn fit(dataset: &LabeledDataset, c: f64, epochs: usize) -> Self {
        let standardizer = Standardizer::fit(&dataset.features);
        let rows = standardizer.apply_all(&dataset.features);
        let n = rows.len() as f64;
        let k = dataset.width();
        let mut weights = vec![0.0; k];
        let mut bias = 0.0;
        let mut grad_w = vec![0.0; k];
        for t in 1..=epochs {
            let lr = 1.0 / (c * t as f64);
            grad_w.clone_from(&weights); // d/dw of |w|^2/2
            let mut grad_b = 0.0;
            for (row, &label) in rows.iter().zip(&dataset.labels) {
                let y = if label { 1.0 } else { -1.0 };
                let margin = y * (bias + crate::linalg::dot(&weights, row));
                if margin < 1.0 {
                    for (g, v) in grad_w.iter_mut().zip(row) {
                        *g -= c * y * v / n;
                    }
                    grad_b -= c * y / n;
                }
            }
            for (w, g) in weights.iter_mut().zip(&grad_w) {
                *w -= lr * g;
            }
            bias -= lr * grad_b;
        }
        Self {
            standardizer,
            weights,
            bias,
        }
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        let z = self.standardizer.apply(x);
        self.bias + crate::linalg::dot(&self.weights, &z) > 0.0
    }
}
