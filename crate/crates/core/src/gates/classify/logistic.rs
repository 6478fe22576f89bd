//! Logistic regression via full-batch gradient descent on standardized
//! features, with a small L2 term to keep separable data stable.

use super::Standardizer;
use crate::gates::features::LabeledDataset;

const ITERS: usize = 400;
const LR: f64 = 0.5;
const L2: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct LogisticModel {
    standardizer: Standardizer,
    weights: Vec<f64>,
    bias: f64,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl LogisticModel {
    pub fn fit(dataset: &LabeledDataset) -> Self {
        let standardizer = Standardizer::fit(&dataset.features);
        let rows = standardizer.apply_all(&dataset.features);
        let n = rows.len() as f64;
        let k = dataset.width();
        let mut weights = vec![0.0; k];
        let mut bias = 0.0;
        let mut grad_w = vec![0.0; k];
        for _ in 0..ITERS {
            grad_w.fill(0.0);
            let mut grad_b = 0.0;
            for (row, &label) in rows.iter().zip(&dataset.labels) {
                let y = if label { 1.0 } else { 0.0 };
                let z = bias + crate::linalg::dot(&weights, row);
                let err = sigmoid(z) - y;
                for (g, v) in grad_w.iter_mut().zip(row) {
                    *g += err * v;
                }
                grad_b += err;
            }
            for (w, g) in weights.iter_mut().zip(&grad_w) {
                *w -= LR * (g / n + L2 * *w);
            }
            bias -= LR * grad_b / n;
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
