//! One-hidden-layer perceptron: ReLU hidden units, softmax output, weighted
//! cross-entropy, full-batch gradient descent.

use serde::{Deserialize, Serialize};

use crate::rng::SplitMix64;

/// Weights of a `d → h → c` network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
    /// `hidden × inputs`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `outputs × hidden`, row-major.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl MlpParams {
    /// He-initialised hidden layer, Glorot-scaled output layer, zero biases.
    pub fn init(inputs: usize, hidden: usize, outputs: usize, seed: u64) -> Self {
        let mut rng = SplitMix64::new(seed);
        let s1 = (2.0 / inputs as f64).sqrt();
        let s2 = (2.0 / (hidden + outputs) as f64).sqrt();
        Self {
            inputs,
            hidden,
            outputs,
            w1: (0..hidden * inputs).map(|_| s1 * rng.normal()).collect(),
            b1: vec![0.0; hidden],
            w2: (0..outputs * hidden).map(|_| s2 * rng.normal()).collect(),
            b2: vec![0.0; outputs],
        }
    }

    pub fn len(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All parameters in the order w1, b1, w2, b2.
    pub fn flatten(&self) -> Vec<f64> {
        [&self.w1[..], &self.b1, &self.w2, &self.b2].concat()
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let (a, rest) = flat.split_at(self.w1.len());
        let (b, rest) = rest.split_at(self.b1.len());
        let (c, d) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(a);
        self.b1.copy_from_slice(b);
        self.w2.copy_from_slice(c);
        self.b2.copy_from_slice(d);
    }

    fn hidden_of(&self, row: &[f64]) -> Vec<f64> {
        (0..self.hidden)
            .map(|j| {
                let w = &self.w1[j * self.inputs..(j + 1) * self.inputs];
                (self.b1[j] + w.iter().zip(row).map(|(a, b)| a * b).sum::<f64>()).max(0.0)
            })
            .collect()
    }

    fn logits_of(&self, hidden: &[f64]) -> Vec<f64> {
        (0..self.outputs)
            .map(|k| {
                let w = &self.w2[k * self.hidden..(k + 1) * self.hidden];
                self.b2[k] + w.iter().zip(hidden).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }

    pub fn predict_row(&self, row: &[f64]) -> Vec<f64> {
        softmax(&self.logits_of(&self.hidden_of(row)))
    }
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Loss `Σ w_i·CE_i / Σ w_i + (l2/2)·(|W1|² + |W2|²)` for sample weights `w_i`.
pub fn mlp_loss(p: &MlpParams, x: &[Vec<f64>], y: &[usize], sample_w: &[f64], l2: f64) -> f64 {
    let total_w: f64 = sample_w.iter().sum();
    let mut loss = 0.0;
    for ((row, &t), &w) in x.iter().zip(y).zip(sample_w) {
        let z = p.logits_of(&p.hidden_of(row));
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        loss += w * (lse - z[t]);
    }
    let reg = p.w1.iter().chain(&p.w2).map(|v| v * v).sum::<f64>();
    loss / total_w + 0.5 * l2 * reg
}

/// Loss and its gradient by backpropagation, gradient in [`MlpParams::flatten`] order.
pub fn mlp_loss_grad(p: &MlpParams, x: &[Vec<f64>], y: &[usize], sample_w: &[f64], l2: f64) -> (f64, Vec<f64>) {
    let (d, h, c) = (p.inputs, p.hidden, p.outputs);
    let total_w: f64 = sample_w.iter().sum();
    let mut g_w1 = vec![0.0; h * d];
    let mut g_b1 = vec![0.0; h];
    let mut g_w2 = vec![0.0; c * h];
    let mut g_b2 = vec![0.0; c];
    let mut loss = 0.0;
    for ((row, &t), &w) in x.iter().zip(y).zip(sample_w) {
        let a = p.hidden_of(row);
        let z = p.logits_of(&a);
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        loss += w * (lse - z[t]);
        let scale = w / total_w;
        let dz: Vec<f64> = (0..c)
            .map(|k| scale * ((z[k] - lse).exp() - if k == t { 1.0 } else { 0.0 }))
            .collect();
        let mut da = vec![0.0; h];
        for k in 0..c {
            g_b2[k] += dz[k];
            for j in 0..h {
                g_w2[k * h + j] += dz[k] * a[j];
                da[j] += dz[k] * p.w2[k * h + j];
            }
        }
        for j in 0..h {
            if a[j] <= 0.0 {
                continue;
            }
            g_b1[j] += da[j];
            let g = &mut g_w1[j * d..(j + 1) * d];
            for (gi, xi) in g.iter_mut().zip(row) {
                *gi += da[j] * xi;
            }
        }
    }
    for (g, v) in g_w1.iter_mut().zip(&p.w1) {
        *g += l2 * v;
    }
    for (g, v) in g_w2.iter_mut().zip(&p.w2) {
        *g += l2 * v;
    }
    let reg = p.w1.iter().chain(&p.w2).map(|v| v * v).sum::<f64>();
    (loss / total_w + 0.5 * l2 * reg, [g_w1, g_b1, g_w2, g_b2].concat())
}

/// Gradient descent with step halving: a step that raises the loss is
/// rejected and retried at half the rate, so the recorded losses never
/// increase. Returns the per-epoch loss history.
pub fn train_mlp(
    p: &mut MlpParams,
    x: &[Vec<f64>],
    y: &[usize],
    sample_w: &[f64],
    epochs: usize,
    learning_rate: f64,
    l2: f64,
) -> Vec<f64> {
    let mut lr = learning_rate;
    let mut theta = p.flatten();
    let (mut loss, mut grad) = mlp_loss_grad(p, x, y, sample_w, l2);
    let mut history = vec![loss];
    for _ in 0..epochs {
        let mut accepted = false;
        while lr > learning_rate * 1e-6 {
            let trial: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t - lr * g).collect();
            p.set_flat(&trial);
            let (l, g) = mlp_loss_grad(p, x, y, sample_w, l2);
            if l <= loss {
                theta = trial;
                loss = l;
                grad = g;
                accepted = true;
                break;
            }
            lr *= 0.5;
        }
        if !accepted {
            p.set_flat(&theta);
            break;
        }
        history.push(loss);
    }
    p.set_flat(&theta);
    history
}
