//! Stratified train/test partitions.

use serde::{Deserialize, Serialize};

use super::resample::class_counts;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case", deny_unknown_fields)]
pub enum SplitConfig {
    StratifiedShuffle { train_fraction: f64, seed: u64 },
    StratifiedKfold { k: usize, seed: u64 },
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig::StratifiedKfold { k: 5, seed: 0 }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SplitConfig::StratifiedShuffle { train_fraction, .. }
                if !(train_fraction > 0.0 && train_fraction < 1.0) =>
            {
                Err(Error::invalid("train fraction must lie in (0, 1)"))
            }
            SplitConfig::StratifiedKfold { k, .. } if k < 2 => Err(Error::invalid("k-fold needs k ≥ 2")),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Index partitions; each list is sorted ascending.
pub fn split(y: &[usize], classes: usize, cfg: &SplitConfig) -> Result<Vec<Fold>> {
    cfg.validate()?;
    let counts = class_counts(y, classes)?;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &c) in y.iter().enumerate() {
        by_class[c].push(i);
    }
    let seed = match *cfg {
        SplitConfig::StratifiedShuffle { seed, .. } | SplitConfig::StratifiedKfold { seed, .. } => seed,
    };
    for (c, members) in by_class.iter_mut().enumerate() {
        SplitMix64::derive(seed, c as u64).shuffle(members);
    }
    let mut folds = match *cfg {
        SplitConfig::StratifiedShuffle { train_fraction, .. } => {
            let mut f = Fold {
                train: Vec::new(),
                test: Vec::new(),
            };
            for (c, members) in by_class.iter().enumerate() {
                if counts[c] == 0 {
                    continue;
                }
                let n_train = if counts[c] < 2 {
                    counts[c]
                } else {
                    ((train_fraction * counts[c] as f64).round() as usize).clamp(1, counts[c] - 1)
                };
                f.train.extend(&members[..n_train]);
                f.test.extend(&members[n_train..]);
            }
            vec![f]
        }
        SplitConfig::StratifiedKfold { k, .. } => {
            if let Some(c) = counts.iter().position(|&n| n > 0 && n < k) {
                return Err(Error::invalid(format!(
                    "class {c} has {} samples, fewer than {k} folds",
                    counts[c]
                )));
            }
            // Round-robin dealing continues across classes so fold sizes stay even.
            let mut tests = vec![Vec::new(); k];
            let mut next = 0;
            for members in &by_class {
                for &i in members {
                    tests[next % k].push(i);
                    next += 1;
                }
            }
            tests
                .into_iter()
                .map(|test| {
                    let train = (0..y.len()).filter(|i| !test.contains(i)).collect();
                    Fold { train, test }
                })
                .collect()
        }
    };
    for f in &mut folds {
        f.train.sort_unstable();
        f.test.sort_unstable();
    }
    Ok(folds)
}
