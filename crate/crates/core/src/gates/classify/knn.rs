//! k-nearest-neighbor vote over standardized features. Distance ties
//! break toward the lower sample index; vote ties reject.

use super::Standardizer;
use crate::gates::features::LabeledDataset;

#[derive(Debug, Clone)]
pub struct KnnModel {
    standardizer: Standardizer,
    rows: Vec<Vec<f64>>,
    labels: Vec<bool>,
    k: usize,
}

impl KnnModel {
    pub fn fit(dataset: &LabeledDataset, k: usize) -> Self {
        assert!(k >= 1);
        let standardizer = Standardizer::fit(&dataset.features);
        Self {
            rows: standardizer.apply_all(&dataset.features),
            labels: dataset.labels.clone(),
            standardizer,
            k,
        }
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        let z = self.standardizer.apply(x);
        let mut dist: Vec<(f64, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut s = 0.0;
                for (a, b) in row.iter().zip(&z) {
                    let d = a - b;
                    s += d * d;
                }
                (s, i)
            })
            .collect();
        let mut k = self.k.min(dist.len());
        if k > 1 && k % 2 == 0 {
            k -= 1; // keep the vote odd when truncated by a small dataset
        }
        dist.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
        let safe_votes = dist[..k].iter().filter(|(_, i)| self.labels[*i]).count();
        safe_votes * 2 > k
    }
}
