//! Random forest: bootstrapped Gini trees with sqrt-k feature subsampling
//! at every split. Leaf and forest vote ties resolve to reject.

use crate::gates::features::LabeledDataset;
use crate::rng::RngStream;

#[derive(Debug, Clone)]
enum Node {
    Leaf(bool),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> bool {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf(label) => return *label,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ForestModel {
    trees: Vec<Tree>,
}

impl ForestModel {
    pub fn fit(
        dataset: &LabeledDataset,
        n_trees: usize,
        max_depth: usize,
        rng: &mut RngStream,
    ) -> Self {
        let n = dataset.len();
        let k = dataset.width();
        let m_features = (k as f64).sqrt().ceil() as usize;
        let trees = (0..n_trees)
            .map(|t| {
                let mut child = rng.child_indexed("tree", t as u64);
                let indices: Vec<usize> = (0..n).map(|_| child.index(n)).collect();
                let mut tree = Tree { nodes: Vec::new() };
                build_node(
                    dataset,
                    &indices,
                    0,
                    max_depth,
                    m_features,
                    &mut child,
                    &mut tree.nodes,
                );
                tree
            })
            .collect();
        Self { trees }
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        let safe: usize = self.trees.iter().filter(|t| t.predict(x)).count();
        safe * 2 > self.trees.len()
    }
}

fn majority(dataset: &LabeledDataset, indices: &[usize]) -> bool {
    let safe = indices.iter().filter(|&&i| dataset.labels[i]).count();
    safe * 2 > indices.len() // exact split counts as unsafe
}

fn gini(safe: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = safe as f64 / total as f64;
    2.0 * p * (1.0 - p)
}

fn build_node(
    dataset: &LabeledDataset,
    indices: &[usize],
    depth: usize,
    max_depth: usize,
    m_features: usize,
    rng: &mut RngStream,
    nodes: &mut Vec<Node>,
) -> usize {
    let id = nodes.len();
    nodes.push(Node::Leaf(majority(dataset, indices)));
    let safe = indices.iter().filter(|&&i| dataset.labels[i]).count();
    if depth >= max_depth || indices.len() < 2 || safe == 0 || safe == indices.len() {
        return id;
    }

    // Feature subsample without replacement, order fixed by the stream.
    let k = dataset.width();
    let mut candidates: Vec<usize> = Vec::with_capacity(m_features.min(k));
    let mut pool: Vec<usize> = (0..k).collect();
    for _ in 0..m_features.min(k) {
        let j = rng.index(pool.len());
        candidates.push(pool.swap_remove(j));
    }

    let parent_gini = gini(safe, indices.len());
    let mut best: Option<(f64, usize, f64)> = None; // (weighted gini, feature, threshold)
    for &feature in &candidates {
        let mut vals: Vec<(f64, bool)> = indices
            .iter()
            .map(|&i| (dataset.features[i][feature], dataset.labels[i]))
            .collect();
        vals.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("features are finite"));
        let total = vals.len();
        let total_safe = vals.iter().filter(|(_, l)| *l).count();
        let mut left_safe = 0usize;
        for (pos, window) in vals.windows(2).enumerate() {
            if window[0].1 {
                left_safe += 1;
            }
            if window[0].0 == window[1].0 {
                continue;
            }
            let left_n = pos + 1;
            let right_n = total - left_n;
            let weighted = (left_n as f64 * gini(left_safe, left_n)
                + right_n as f64 * gini(total_safe - left_safe, right_n))
                / total as f64;
            let threshold = (window[0].0 + window[1].0) / 2.0;
            if best.map(|(g, _, _)| weighted < g).unwrap_or(true) {
                best = Some((weighted, feature, threshold));
            }
        }
    }

    let Some((weighted, feature, threshold)) = best else {
        return id;
    };
    if weighted >= parent_gini {
        return id; // no impurity reduction
    }

    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
        .iter()
        .partition(|&&i| dataset.features[i][feature] <= threshold);
    if left_idx.is_empty() || right_idx.is_empty() {
        return id;
    }
    let left = build_node(
        dataset,
        &left_idx,
        depth + 1,
        max_depth,
        m_features,
        rng,
        nodes,
    );
    let right = build_node(
        dataset,
        &right_idx,
        depth + 1,
        max_depth,
        m_features,
        rng,
        nodes,
    );
    nodes[id] = Node::Split {
        feature,
        threshold,
        left,
        right,
    };
    id
}
