//! Multilayer perceptron with ReLU hidden layers and a sigmoid output,
//! trained by minibatch SGD (He init, optional momentum) on standardized
//! features. Covers both the 32-unit gate network and the deep 128-64-32
//! baseline.

use super::Standardizer;
use crate::gates::features::LabeledDataset;
use crate::rng::RngStream;

const BATCH: usize = 32;

#[derive(Debug, Clone)]
struct Layer {
    // weights[out][in], row-major
    w: Vec<f64>,
    b: Vec<f64>,
    n_in: usize,
    n_out: usize,
}

impl Layer {
    fn new(n_in: usize, n_out: usize, rng: &mut RngStream) -> Self {
        let scale = (2.0 / n_in as f64).sqrt();
        Self {
            w: rng.normal_vec(n_in * n_out, scale),
            b: vec![0.0; n_out],
            n_in,
            n_out,
        }
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.n_out {
            let row = &self.w[o * self.n_in..(o + 1) * self.n_in];
            out.push(self.b[o] + crate::linalg::dot(row, x));
        }
    }
}

#[derive(Debug, Clone)]
pub struct MlpModel {
    standardizer: Standardizer,
    layers: Vec<Layer>,
}

impl MlpModel {
    /// `hidden` lists hidden-layer widths; the output is a single logit.
    pub fn fit(
        dataset: &LabeledDataset,
        hidden: &[usize],
        epochs: usize,
        lr: f64,
        momentum: f64,
        rng: &mut RngStream,
    ) -> Self {
        let standardizer = Standardizer::fit(&dataset.features);
        let rows = standardizer.apply_all(&dataset.features);
        let n = rows.len();
        let mut sizes = vec![dataset.width()];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let mut layers: Vec<Layer> = sizes
            .windows(2)
            .map(|w| Layer::new(w[0], w[1], rng))
            .collect();

        let mut vel_w: Vec<Vec<f64>> = layers.iter().map(|l| vec![0.0; l.w.len()]).collect();
        let mut vel_b: Vec<Vec<f64>> = layers.iter().map(|l| vec![0.0; l.b.len()]).collect();
        let mut grad_w: Vec<Vec<f64>> = layers.iter().map(|l| vec![0.0; l.w.len()]).collect();
        let mut grad_b: Vec<Vec<f64>> = layers.iter().map(|l| vec![0.0; l.b.len()]).collect();

        // Per-sample activation buffers: pre[l] and post[l] for each layer.
        let n_layers = layers.len();
        let mut post: Vec<Vec<f64>> = vec![Vec::new(); n_layers];
        let mut delta: Vec<Vec<f64>> = layers.iter().map(|l| vec![0.0; l.n_out]).collect();

        for epoch in 0..epochs {
            let order = rng.permutation(n);
            for batch in order.chunks(BATCH) {
                for g in &mut grad_w {
                    g.fill(0.0);
                }
                for g in &mut grad_b {
                    g.fill(0.0);
                }
                for &idx in batch {
                    let x = &rows[idx];
                    let y = if dataset.labels[idx] { 1.0 } else { 0.0 };
                    // Forward: ReLU on hidden layers, raw logit at the top.
                    for l in 0..n_layers {
                        if l == 0 {
                            layers[0].forward(x, &mut post[0]);
                        } else {
                            let (head, tail) = post.split_at_mut(l);
                            layers[l].forward(&head[l - 1], &mut tail[0]);
                        }
                        if l + 1 < n_layers {
                            for v in post[l].iter_mut() {
                                if *v < 0.0 {
                                    *v = 0.0;
                                }
                            }
                        }
                    }
                    let logit = post[n_layers - 1][0];
                    let p = 1.0 / (1.0 + (-logit).exp());
                    delta[n_layers - 1][0] = p - y; // dBCE/dlogit

                    // Backward.
                    for l in (0..n_layers).rev() {
                        let src: &[f64] = if l == 0 { x } else { &post[l - 1] };
                        let layer = &layers[l];
                        for o in 0..layer.n_out {
                            let d = delta[l][o];
                            if d == 0.0 {
                                continue;
                            }
                            grad_b[l][o] += d;
                            let grow = &mut grad_w[l][o * layer.n_in..(o + 1) * layer.n_in];
                            for (g, v) in grow.iter_mut().zip(src) {
                                *g += d * v;
                            }
                        }
                        if l > 0 {
                            let (below, here) = delta.split_at_mut(l);
                            let dl = &mut below[l - 1];
                            dl.fill(0.0);
                            for o in 0..layer.n_out {
                                let d = here[0][o];
                                if d == 0.0 {
                                    continue;
                                }
                                let row = &layer.w[o * layer.n_in..(o + 1) * layer.n_in];
                                for (dv, w) in dl.iter_mut().zip(row) {
                                    *dv += d * w;
                                }
                            }
                            // ReLU gate of the layer below.
                            for (dv, v) in dl.iter_mut().zip(&post[l - 1]) {
                                if *v <= 0.0 {
                                    *dv = 0.0;
                                }
                            }
                        }
                    }
                }
                let scale = lr / batch.len() as f64;
                for l in 0..n_layers {
                    for ((w, v), g) in layers[l].w.iter_mut().zip(&mut vel_w[l]).zip(&grad_w[l]) {
                        *v = momentum * *v - scale * g;
                        *w += *v;
                    }
                    for ((b, v), g) in layers[l].b.iter_mut().zip(&mut vel_b[l]).zip(&grad_b[l]) {
                        *v = momentum * *v - scale * g;
                        *b += *v;
                    }
                }
            }
            let _ = epoch;
        }
        Self {
            standardizer,
            layers,
        }
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        let mut cur = self.standardizer.apply(x);
        let mut next = Vec::new();
        let n_layers = self.layers.len();
        for (l, layer) in self.layers.iter().enumerate() {
            layer.forward(&cur, &mut next);
            if l + 1 < n_layers {
                for v in &mut next {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur[0] > 0.0 // sigmoid(logit) > 0.5
    }
}
