//! Target registration error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::LandmarkSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreSummary {
    pub mean: f64,
    /// Sample standard deviation (0 for a single point).
    pub std: f64,
    pub per_point: Vec<f64>,
}

impl TreSummary {
    /// "mean ± std" with two decimals.
    pub fn display(&self) -> String {
        format_mean_std(self.mean, self.std)
    }
}

pub fn format_mean_std(mean: f64, std: f64) -> String {
    format!("{mean:.2} ± {std:.2}")
}

/// Euclidean distances in mm between corresponding voxel landmarks.
pub fn tre(predicted: &LandmarkSet, truth: &LandmarkSet, spacing: [f64; 3]) -> Result<TreSummary> {
    if predicted.len() != truth.len() {
        return Err(Error::invalid(format!(
            "landmark count mismatch: {} vs {}",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::invalid("no landmarks"));
    }
    let per_point: Vec<f64> = predicted
        .points
        .iter()
        .zip(&truth.points)
        .map(|(p, q)| (0..3).map(|k| ((p[k] - q[k]) * spacing[k]).powi(2)).sum::<f64>().sqrt())
        .collect();
    let n = per_point.len() as f64;
    let mean = per_point.iter().sum::<f64>() / n;
    let std = if per_point.len() > 1 {
        (per_point.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(TreSummary { mean, std, per_point })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(points: Vec<[f64; 3]>) -> LandmarkSet {
        LandmarkSet::new(points, [1.0; 3]).unwrap()
    }

    #[test]
    fn examples() {
        let a = set(vec![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]);
        let r = tre(&a, &a, [1.0; 3]).unwrap();
        assert_eq!((r.mean, r.std), (0.0, 0.0));
        let b = set(a.points.iter().map(|p| [p[0] + 3.0, p[1] + 4.0, p[2]]).collect());
        let r = tre(&b, &a, [1.0; 3]).unwrap();
        assert!((r.mean - 5.0).abs() < 1e-12 && r.std.abs() < 1e-12);
        assert!((tre(&b, &a, [2.0; 3]).unwrap().mean - 10.0).abs() < 1e-12);
        assert!(tre(&set(vec![[0.0; 3]]), &a, [1.0; 3]).is_err());
        assert_eq!(format_mean_std(6.68, 5.98), "6.68 ± 5.98");
    }
}
