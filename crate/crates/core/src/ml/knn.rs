//! k-nearest-neighbour voting.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub classes: usize,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
}

impl KnnModel {
    /// Vote fractions among the `k` nearest training rows. Equal distances
    /// prefer the lower class, then the earlier row.
    pub fn predict_row(&self, row: &[f64]) -> Vec<f64> {
        let mut d: Vec<(f64, usize, usize)> = self
            .x
            .iter()
            .zip(&self.y)
            .enumerate()
            .map(|(i, (t, &c))| (t.iter().zip(row).map(|(a, b)| (a - b) * (a - b)).sum(), c, i))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let k = self.k.min(d.len());
        let mut p = vec![0.0; self.classes];
        for &(_, c, _) in &d[..k] {
            p[c] += 1.0;
        }
        p.iter_mut().for_each(|v| *v /= k as f64);
        p
    }
}
