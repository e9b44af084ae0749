//! Class balancing: SMOTE oversampling and inverse-frequency weights.

use super::scale::check_rows;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Per-class sample counts for labels in `0..classes`.
pub fn class_counts(y: &[usize], classes: usize) -> Result<Vec<usize>> {
    let mut counts = vec![0; classes];
    for &c in y {
        *counts
            .get_mut(c)
            .ok_or_else(|| Error::invalid(format!("label {c} outside 0..{classes}")))? += 1;
    }
    Ok(counts)
}

/// Balanced weights `n / (classes · n_c)`.
pub fn class_weights(y: &[usize], classes: usize) -> Result<Vec<f64>> {
    let counts = class_counts(y, classes)?;
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::invalid(format!("class {c} has no samples")));
    }
    let n = y.len() as f64;
    Ok(counts.iter().map(|&c| n / (classes as f64 * c as f64)).collect())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Oversamples every class up to the majority count. Originals come first in
/// their input order, then synthetic rows class by class.
pub fn smote(x: &[Vec<f64>], y: &[usize], classes: usize, k: usize, seed: u64) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    check_rows(x)?;
    if x.len() != y.len() {
        return Err(Error::invalid("one label per row required"));
    }
    if k == 0 {
        return Err(Error::invalid("SMOTE needs k ≥ 1"));
    }
    let counts = class_counts(y, classes)?;
    let target = counts.iter().copied().max().unwrap_or(0);
    let (mut xs, mut ys) = (x.to_vec(), y.to_vec());
    for c in 0..classes {
        let need = target - counts[c];
        if need == 0 {
            continue;
        }
        let members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
        if members.len() < 2 {
            return Err(Error::invalid(format!(
                "class {c} has {} sample(s); SMOTE needs two",
                members.len()
            )));
        }
        // k nearest same-class neighbours of each member, ties by index
        let neighbours: Vec<Vec<usize>> = members
            .iter()
            .map(|&i| {
                let mut others: Vec<(f64, usize)> = members
                    .iter()
                    .filter(|&&j| j != i)
                    .map(|&j| (sq_dist(&x[i], &x[j]), j))
                    .collect();
                others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                others.into_iter().take(k).map(|(_, j)| j).collect()
            })
            .collect();
        let mut rng = SplitMix64::derive(seed, c as u64);
        for s in 0..need {
            let m = s % members.len();
            let base = &x[members[m]];
            let nn = &x[neighbours[m][rng.below(neighbours[m].len())]];
            let lambda = rng.next_f64();
            xs.push(base.iter().zip(nn).map(|(a, b)| a + lambda * (b - a)).collect());
            ys.push(c);
        }
    }
    Ok((xs, ys))
}

/// Binary relabelling: `positive` becomes 1, every other class 0.
pub fn one_vs_all(y: &[usize], positive: usize) -> Result<Vec<usize>> {
    if !y.contains(&positive) {
        return Err(Error::invalid(format!("class {positive} does not occur")));
    }
    Ok(y.iter().map(|&c| (c == positive) as usize).collect())
}
