//! Similarity metrics. Every cost is oriented for minimisation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{min_max, ScalarVolume};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "MSE")]
    Mse,
    #[serde(rename = "NCC")]
    Ncc,
    #[serde(rename = "MI")]
    Mi,
}

fn overlap<'a>(
    fixed: &'a ScalarVolume,
    warped: &'a ScalarVolume,
    mask: Option<&'a [bool]>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    fixed.geometry().ensure_same(warped.geometry(), "similarity")?;
    if let Some(m) = mask {
        if m.len() != fixed.data().len() {
            return Err(Error::invalid("mask length does not match volume"));
        }
    }
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (i, (&f, &w)) in fixed.data().iter().zip(warped.data()).enumerate() {
        if mask.is_none_or(|m| m[i]) {
            a.push(f);
            b.push(w);
        }
    }
    if a.is_empty() {
        return Err(Error::invalid("empty overlap"));
    }
    Ok((a, b))
}

pub fn mean_squared_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Pearson correlation; errors when either side has zero variance.
pub fn normalized_cross_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return Err(Error::invalid("zero-variance input for NCC"));
    }
    Ok(sab / (saa.sqrt() * sbb.sqrt()))
}

/// Histogram bin of `v` within `[lo, hi]` using `bins` equal-width bins.
#[inline]
pub fn hard_bin(v: f64, lo: f64, hi: f64, bins: usize) -> usize {
    if hi <= lo {
        return 0;
    }
    let t = ((v - lo) / (hi - lo) * bins as f64).floor();
    (t.max(0.0) as usize).min(bins - 1)
}

/// Mutual information in bits from a joint histogram of `bins`² cells.
pub fn mi_from_joint(joint: &[f64], bins: usize) -> f64 {
    let mut row = vec![0.0; bins];
    let mut col = vec![0.0; bins];
    let mut n = 0.0;
    for i in 0..bins {
        for j in 0..bins {
            let h = joint[i * bins + j];
            row[i] += h;
            col[j] += h;
            n += h;
        }
    }
    mi_from_parts(joint, &row, &col, n, bins)
}

fn mi_from_parts(joint: &[f64], row: &[f64], col: &[f64], n: f64, bins: usize) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    let mut mi = 0.0;
    for i in 0..bins {
        if row[i] <= 0.0 {
            continue;
        }
        for j in 0..bins {
            let h = joint[i * bins + j];
            if h > 0.0 && col[j] > 0.0 {
                mi += h * (h * n / (row[i] * col[j])).log2();
            }
        }
    }
    (mi / n).max(0.0)
}

/// Hard-binned mutual information in bits, each side binned over its own range.
pub fn mutual_information(a: &[f64], b: &[f64], bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::invalid("MI needs at least 2 bins"));
    }
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::invalid("MI inputs must be non-empty and equally long"));
    }
    let (alo, ahi) = min_max(a);
    let (blo, bhi) = min_max(b);
    let mut joint = vec![0.0; bins * bins];
    for (x, y) in a.iter().zip(b) {
        joint[hard_bin(*x, alo, ahi, bins) * bins + hard_bin(*y, blo, bhi, bins)] += 1.0;
    }
    Ok(mi_from_joint(&joint, bins))
}

/// Cost of `warped` against `fixed`: MSE, −NCC or −MI, over the masked overlap.
pub fn similarity(
    fixed: &ScalarVolume,
    warped: &ScalarVolume,
    metric: Metric,
    mi_bins: usize,
    mask: Option<&[bool]>,
) -> Result<f64> {
    let (a, b) = overlap(fixed, warped, mask)?;
    match metric {
        Metric::Mse => Ok(mean_squared_error(&a, &b)),
        Metric::Ncc => Ok(-normalized_cross_correlation(&a, &b)?),
        Metric::Mi => Ok(-mutual_information(&a, &b, mi_bins)?),
    }
}

/// Fixed-side quantities precomputed per optimisation sample.
#[derive(Debug, Clone, Copy)]
pub(crate) struct FixedSample {
    pub value: f64,
    pub bin: u32,
}

/// Moving-intensity soft-binning parameters for MI.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SoftBins {
    pub lo: f64,
    pub scale: f64,
    pub bins: usize,
}

impl SoftBins {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Self {
        let scale = if hi > lo { (bins - 1) as f64 / (hi - lo) } else { 0.0 };
        Self { lo, scale, bins }
    }

    /// Lower bin and fraction assigned to the next bin up.
    #[inline]
    pub fn split(&self, v: f64) -> (usize, f64) {
        let t = ((v - self.lo) * self.scale).clamp(0.0, (self.bins - 1) as f64);
        let b = (t.floor() as usize).min(self.bins - 2);
        (b, t - b as f64)
    }
}

#[inline]
fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// Adds `delta` to `cells[i]`, keeping `sum = Σ x ln x` current.
#[inline]
fn bump(cells: &mut [f64], i: usize, delta: f64, sum: &mut f64) {
    let old = cells[i];
    let mut new = old + delta;
    if new.abs() < 1e-9 {
        new = 0.0;
    }
    *sum += xlogx(new) - xlogx(old);
    cells[i] = new;
}

/// Running sufficient statistics for a metric, supporting add and remove.
#[derive(Debug, Clone)]
pub(crate) enum Accumulator {
    Mse {
        sum_sq: f64,
        n: f64,
    },
    Ncc {
        sf: f64,
        sm: f64,
        sff: f64,
        smm: f64,
        sfm: f64,
        n: f64,
    },
    Mi(Box<MiState>),
}

#[derive(Debug, Clone)]
pub(crate) struct MiState {
    joint: Vec<f64>,
    row: Vec<f64>,
    col: Vec<f64>,
    n: f64,
    // Σ x ln x over joint, row and column cells
    sj: f64,
    sr: f64,
    sc: f64,
    soft: SoftBins,
}

impl Accumulator {
    pub fn new(metric: Metric, soft: SoftBins) -> Self {
        match metric {
            Metric::Mse => Accumulator::Mse { sum_sq: 0.0, n: 0.0 },
            Metric::Ncc => Accumulator::Ncc {
                sf: 0.0,
                sm: 0.0,
                sff: 0.0,
                smm: 0.0,
                sfm: 0.0,
                n: 0.0,
            },
            Metric::Mi => {
                let b = soft.bins;
                Accumulator::Mi(Box::new(MiState {
                    joint: vec![0.0; b * b],
                    row: vec![0.0; b],
                    col: vec![0.0; b],
                    n: 0.0,
                    sj: 0.0,
                    sr: 0.0,
                    sc: 0.0,
                    soft,
                }))
            }
        }
    }

    /// Adds (`sign = 1`) or removes (`sign = -1`) one sample pair.
    #[inline]
    pub fn update(&mut self, f: &FixedSample, m: f64, sign: f64) {
        match self {
            Accumulator::Mse { sum_sq, n } => {
                *sum_sq += sign * (f.value - m) * (f.value - m);
                *n += sign;
            }
            Accumulator::Ncc {
                sf,
                sm,
                sff,
                smm,
                sfm,
                n,
            } => {
                *sf += sign * f.value;
                *sm += sign * m;
                *sff += sign * f.value * f.value;
                *smm += sign * m * m;
                *sfm += sign * f.value * m;
                *n += sign;
            }
            Accumulator::Mi(s) => {
                let bins = s.soft.bins;
                let (b, t) = s.soft.split(m);
                let r = f.bin as usize;
                bump(&mut s.joint, r * bins + b, sign * (1.0 - t), &mut s.sj);
                bump(&mut s.joint, r * bins + b + 1, sign * t, &mut s.sj);
                bump(&mut s.col, b, sign * (1.0 - t), &mut s.sc);
                bump(&mut s.col, b + 1, sign * t, &mut s.sc);
                bump(&mut s.row, r, sign, &mut s.sr);
                s.n += sign;
            }
        }
    }

    /// Recomputes running entropy sums from the histograms to shed drift.
    pub fn refresh(&mut self) {
        if let Accumulator::Mi(s) = self {
            s.sj = s.joint.iter().map(|&x| xlogx(x)).sum();
            s.sr = s.row.iter().map(|&x| xlogx(x)).sum();
            s.sc = s.col.iter().map(|&x| xlogx(x)).sum();
        }
    }

    /// Current cost; `+inf` when undefined (no overlap, flat signal).
    pub fn cost(&self) -> f64 {
        match self {
            Accumulator::Mse { sum_sq, n } => {
                if *n < 0.5 {
                    f64::INFINITY
                } else {
                    sum_sq.max(0.0) / n
                }
            }
            Accumulator::Ncc {
                sf,
                sm,
                sff,
                smm,
                sfm,
                n,
            } => {
                if *n < 1.5 {
                    return f64::INFINITY;
                }
                let cov = sfm - sf * sm / n;
                let vf = sff - sf * sf / n;
                let vm = smm - sm * sm / n;
                if vf <= 1e-12 * sff.abs().max(1e-300) || vm <= 1e-12 * smm.abs().max(1e-300) {
                    return f64::INFINITY;
                }
                -cov / (vf.sqrt() * vm.sqrt())
            }
            Accumulator::Mi(s) => {
                if s.n < 0.5 {
                    return f64::INFINITY;
                }
                let mi = (s.sj - s.sr - s.sc + xlogx(s.n)) / (s.n * std::f64::consts::LN_2);
                -mi.max(0.0)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use crate::volume::Geometry;

    fn vol(data: Vec<f64>) -> ScalarVolume {
        let n = data.len();
        ScalarVolume::new(Geometry::unit([n, 1, 1]), data).unwrap()
    }

    #[test]
    fn identical_volumes() {
        let v = vol(vec![1.0, 2.0, 5.0, 3.0]);
        assert_eq!(similarity(&v, &v, Metric::Mse, 64, None).unwrap(), 0.0);
        assert!((similarity(&v, &v, Metric::Ncc, 64, None).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn offset_volume() {
        let v = vol(vec![1.0, 2.0, 5.0, 3.0]);
        let w = v.map(|x| x + 0.5).unwrap();
        assert!((similarity(&v, &w, Metric::Mse, 64, None).unwrap() - 0.25).abs() < 1e-12);
        assert!((similarity(&v, &w, Metric::Ncc, 64, None).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_valued_mi_is_one_bit() {
        let v = vol(vec![0.0, 1.0, 0.0, 1.0, 1.0, 0.0]);
        assert!((similarity(&v, &v, Metric::Mi, 64, None).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let v = vol(vec![1.0, 1.0, 1.0]);
        let w = vol(vec![1.0, 2.0, 3.0]);
        assert!(similarity(&v, &w, Metric::Ncc, 64, None).is_err());
        assert!(similarity(&v, &w, Metric::Mse, 64, Some(&[false; 3])).is_err());
    }

    #[test]
    fn accumulators_match_direct_evaluation() {
        let mut rng = SplitMix64::new(77);
        let a: Vec<f64> = (0..500).map(|_| rng.next_f64()).collect();
        let b: Vec<f64> = a.iter().map(|x| 0.3 * x + 0.1 * rng.next_f64()).collect();
        let bins = 16;
        let soft = SoftBins::new(0.0, 0.4, bins);
        let samples: Vec<FixedSample> = a
            .iter()
            .map(|&v| FixedSample {
                value: v,
                bin: hard_bin(v, 0.0, 1.0, bins) as u32,
            })
            .collect();
        for metric in [Metric::Mse, Metric::Ncc] {
            let mut acc = Accumulator::new(metric, soft);
            for (s, &m) in samples.iter().zip(&b) {
                acc.update(s, m, 1.0);
            }
            let direct = match metric {
                Metric::Mse => mean_squared_error(&a, &b),
                _ => -normalized_cross_correlation(&a, &b).unwrap(),
            };
            assert!((acc.cost() - direct).abs() < 1e-9);
            // remove then re-add leaves cost unchanged
            acc.update(&samples[3], b[3], -1.0);
            acc.update(&samples[3], b[3], 1.0);
            assert!((acc.cost() - direct).abs() < 1e-9);
        }
        let mut acc = Accumulator::new(Metric::Mi, soft);
        for (s, &m) in samples.iter().zip(&b) {
            acc.update(s, m, 1.0);
        }
        let running = acc.cost();
        acc.refresh();
        assert!(running < 0.0 && (running - acc.cost()).abs() < 1e-9);
        // soft-binned joint histogram evaluated directly
        let mut joint = vec![0.0; bins * bins];
        for (s, &m) in samples.iter().zip(&b) {
            let (k, t) = soft.split(m);
            joint[s.bin as usize * bins + k] += 1.0 - t;
            joint[s.bin as usize * bins + k + 1] += t;
        }
        assert!((acc.cost() + mi_from_joint(&joint, bins)).abs() < 1e-9);
    }
}
