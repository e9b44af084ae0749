use crate::error::{Error, Result};
use crate::volume::{LabelVolume, ScalarVolume};

/// Otsu threshold and the resulting foreground mask.
#[derive(Debug, Clone)]
pub struct Otsu {
    /// Threshold in input intensity units; the mask is `value > threshold`.
    pub threshold: f64,
    /// Winning level in `0..=255`.
    pub level: usize,
    pub mask: LabelVolume,
}

/// 256-level histogram of `values` over `[min, max]`:
/// `level = round((v - min) / (max - min) * 255)`.
pub fn quantize_levels(values: &[f64], min: f64, max: f64) -> [u64; 256] {
    let mut hist = [0u64; 256];
    let scale = 255.0 / (max - min);
    for &v in values {
        let level = ((v - min) * scale).round().clamp(0.0, 255.0) as usize;
        hist[level] += 1;
    }
    hist
}

/// Level maximising the between-class variance `n0·n1·(μ0 − μ1)² / n²`,
/// where class 0 holds levels `≤ t`. Ties go to the lowest level. All sums
/// are exact integers, so equal partitions score bit-identically.
pub fn otsu_from_histogram(hist: &[u64; 256]) -> Option<usize> {
    let total: u64 = hist.iter().sum();
    let total_sum: u64 = hist.iter().enumerate().map(|(l, &c)| l as u64 * c).sum();
    let mut n0 = 0u64;
    let mut s0 = 0u64;
    let mut best: Option<(usize, f64)> = None;
    for t in 0..255 {
        n0 += hist[t];
        s0 += t as u64 * hist[t];
        let n1 = total - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let mu0 = s0 as f64 / n0 as f64;
        let mu1 = (total_sum - s0) as f64 / n1 as f64;
        let var = (n0 as f64 * n1 as f64) * (mu0 - mu1) * (mu0 - mu1) / (total as f64 * total as f64);
        if best.is_none_or(|(_, b)| var > b) {
            best = Some((t, var));
        }
    }
    best.map(|(t, _)| t)
}

/// Global Otsu threshold over a 256-level histogram of `[min, max]`.
pub fn otsu_threshold(vol: &ScalarVolume) -> Result<Otsu> {
    let (min, max) = vol.min_max();
    if !(max > min) {
        return Err(Error::DegenerateHistogram);
    }
    let hist = quantize_levels(vol.data(), min, max);
    let level = otsu_from_histogram(&hist).ok_or(Error::DegenerateHistogram)?;
    let threshold = min + level as f64 * (max - min) / 255.0;
    let mask: Vec<bool> = vol.data().iter().map(|&v| v > threshold).collect();
    Ok(Otsu {
        threshold,
        level,
        mask: LabelVolume::binary(*vol.geometry(), &mask)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_level_volume() {
        let mut data = vec![10.0; 50];
        data.extend(vec![200.0; 50]);
        let vol = ScalarVolume::image(10, 10, data).unwrap();
        let o = otsu_threshold(&vol).unwrap();
        assert_eq!(o.level, 0);
        assert_eq!(o.threshold, 10.0);
        for (v, &m) in vol.data().iter().zip(o.mask.data()) {
            assert_eq!(m == 1, *v == 200.0);
        }
    }

    #[test]
    fn binary_extremes_split_in_half() {
        let data: Vec<f64> = (0..64).map(|i| if i % 2 == 0 { 0.0 } else { 255.0 }).collect();
        let o = otsu_threshold(&ScalarVolume::image(8, 8, data).unwrap()).unwrap();
        assert_eq!(o.mask.count(1), 32);
    }

    #[test]
    fn constant_is_degenerate() {
        let vol = ScalarVolume::image(4, 4, vec![3.0; 16]).unwrap();
        assert!(matches!(otsu_threshold(&vol), Err(Error::DegenerateHistogram)));
    }
}
