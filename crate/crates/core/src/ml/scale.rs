//! Per-column z-scoring fitted on training rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation; 0 marks a constant column.
    pub std: Vec<f64>,
}

/// Checks that `x` is a non-empty rectangle of finite values; returns its width.
pub(crate) fn check_rows(x: &[Vec<f64>]) -> Result<usize> {
    let d = x.first().map(Vec::len).ok_or_else(|| Error::invalid("no samples"))?;
    for (i, row) in x.iter().enumerate() {
        if row.len() != d {
            return Err(Error::invalid(format!(
                "row {i} has {} columns, expected {d}",
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("row {i} has a non-finite value")));
        }
    }
    Ok(d)
}

pub fn standardize_fit(x: &[Vec<f64>]) -> Result<Standardizer> {
    let d = check_rows(x)?;
    if x.len() < 2 {
        return Err(Error::invalid("standardization needs at least two samples"));
    }
    let n = x.len() as f64;
    let mut mean = vec![0.0; d];
    for row in x {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for row in x {
        for j in 0..d {
            var[j] += (row[j] - mean[j]).powi(2);
        }
    }
    // Relative floor so float noise on a constant column is not amplified.
    let std = var
        .iter()
        .zip(&mean)
        .map(|(v, m)| {
            let s = (v / n).sqrt();
            if s > 1e-12 * m.abs().max(1.0) {
                s
            } else {
                0.0
            }
        })
        .collect();
    Ok(Standardizer { mean, std })
}

impl Standardizer {
    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| if *s > 0.0 { (v - m) / s } else { v - m })
            .collect()
    }
}

pub fn standardize_apply(scaler: &Standardizer, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let d = check_rows(x)?;
    if d != scaler.mean.len() {
        return Err(Error::invalid("column count differs from the fitted scaler"));
    }
    Ok(x.iter().map(|r| scaler.apply_row(r)).collect())
}
