//! Random forest of CART trees split on Gini impurity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        distribution: Vec<f64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { distribution } => return distribution,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub classes: usize,
    pub trees: Vec<Tree>,
}

impl ForestModel {
    pub fn predict_row(&self, row: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.classes];
        for t in &self.trees {
            for (a, b) in p.iter_mut().zip(t.predict_row(row)) {
                *a += b;
            }
        }
        p.iter_mut().for_each(|v| *v /= self.trees.len() as f64);
        p
    }
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    classes: usize,
    max_depth: Option<usize>,
    mtry: usize,
    rng: SplitMix64,
    nodes: Vec<Node>,
}

fn gini(counts: &[f64], n: f64) -> f64 {
    1.0 - counts.iter().map(|c| (c / n) * (c / n)).sum::<f64>()
}

impl Builder<'_> {
    fn leaf(&self, idx: &[usize]) -> Node {
        let mut distribution = vec![0.0; self.classes];
        for &i in idx {
            distribution[self.y[i]] += 1.0;
        }
        distribution.iter_mut().for_each(|v| *v /= idx.len() as f64);
        Node::Leaf { distribution }
    }

    /// Best `(feature, threshold, weighted child impurity)` over one feature.
    fn best_on(&self, idx: &[usize], f: usize) -> Option<(f64, f64)> {
        let mut order: Vec<usize> = idx.to_vec();
        order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
        let n = order.len() as f64;
        let mut left = vec![0.0; self.classes];
        let mut right = vec![0.0; self.classes];
        for &i in &order {
            right[self.y[i]] += 1.0;
        }
        let mut best: Option<(f64, f64)> = None;
        for s in 0..order.len() - 1 {
            let c = self.y[order[s]];
            left[c] += 1.0;
            right[c] -= 1.0;
            let (a, b) = (self.x[order[s]][f], self.x[order[s + 1]][f]);
            if a == b {
                continue;
            }
            let nl = (s + 1) as f64;
            let score = (nl * gini(&left, nl) + (n - nl) * gini(&right, n - nl)) / n;
            if best.is_none_or(|(sc, _)| score < sc) {
                let mid = a + (b - a) / 2.0;
                // guard against the midpoint rounding onto the upper value
                best = Some((score, if mid < b { mid } else { a }));
            }
        }
        best
    }

    fn grow(&mut self, idx: &[usize], depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            distribution: Vec::new(),
        });
        let pure = idx.iter().all(|&i| self.y[i] == self.y[idx[0]]);
        if pure || idx.len() < 2 || self.max_depth.is_some_and(|m| depth >= m) {
            self.nodes[id] = self.leaf(idx);
            return id;
        }
        let d = self.x[0].len();
        let mut features: Vec<usize> = (0..d).collect();
        self.rng.shuffle(&mut features);
        // Examine `mtry` features; keep going only if none of them can split.
        let mut best: Option<(f64, usize, f64)> = None;
        for (tried, &f) in features.iter().enumerate() {
            if tried >= self.mtry && best.is_some() {
                break;
            }
            if let Some((score, thr)) = self.best_on(idx, f) {
                if best.is_none_or(|(s, _, _)| score < s) {
                    best = Some((score, f, thr));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            self.nodes[id] = self.leaf(idx);
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let left = self.grow(&l, depth + 1);
        let right = self.grow(&r, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

pub struct ForestParams {
    pub trees: usize,
    pub max_depth: Option<usize>,
    pub features_per_split: usize,
    pub seed: u64,
}

/// Tree `t` grows from stream `t` of the seed. A single tree sees every
/// sample; larger forests draw bootstrap samples.
pub fn train_forest(x: &[Vec<f64>], y: &[usize], classes: usize, params: &ForestParams) -> ForestModel {
    let n = x.len();
    let trees = (0..params.trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = SplitMix64::derive(params.seed, t as u64);
            let idx: Vec<usize> = if params.trees == 1 {
                (0..n).collect()
            } else {
                (0..n).map(|_| rng.below(n)).collect()
            };
            let mut b = Builder {
                x,
                y,
                classes,
                max_depth: params.max_depth,
                mtry: params.features_per_split.max(1),
                rng,
                nodes: Vec::new(),
            };
            b.grow(&idx, 0);
            Tree { nodes: b.nodes }
        })
        .collect();
    ForestModel { classes, trees }
}
