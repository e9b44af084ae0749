//! Contrast-limited adaptive histogram equalisation on 2D images.
//!
//! Intensities are quantised to 256 levels over the image range. Each tile
//! histogram is clipped at `clip · tile_pixels / 256` (at least 1) and the
//! excess spread evenly; tile CDFs become lookup tables that are blended
//! bilinearly between tile centres. The output is mapped back to the input
//! range, so it never leaves `[min, max]`.

use super::ct::CtPreprocessConfig;
use crate::error::{Error, Result};
use crate::volume::ScalarVolume;

/// Clips `hist` at `limit` and redistributes the excess: an equal share to
/// every bin, then the remainder one count at a time with a uniform stride.
/// Total mass is preserved.
pub fn clip_histogram(hist: &mut [u32; 256], limit: u32) {
    let mut excess = 0u32;
    for h in hist.iter_mut() {
        if *h > limit {
            excess += *h - limit;
            *h = limit;
        }
    }
    let batch = excess / 256;
    let residual = excess % 256;
    for h in hist.iter_mut() {
        *h += batch;
    }
    if residual > 0 {
        let step = (256 / residual).max(1) as usize;
        let mut left = residual;
        let mut i = 0;
        while left > 0 && i < 256 {
            hist[i] += 1;
            left -= 1;
            i += step;
        }
    }
}

fn tile_bounds(n: usize, tiles: usize) -> Vec<(usize, usize)> {
    (0..tiles).map(|i| (i * n / tiles, (i + 1) * n / tiles)).collect()
}

/// Index of the lower neighbouring tile centre and the blend weight toward
/// the upper one.
fn blend(pos: f64, centers: &[f64]) -> (usize, usize, f64) {
    if pos <= centers[0] {
        return (0, 0, 0.0);
    }
    let last = centers.len() - 1;
    if pos >= centers[last] {
        return (last, last, 0.0);
    }
    let i = centers.partition_point(|&c| c <= pos) - 1;
    let t = (pos - centers[i]) / (centers[i + 1] - centers[i]);
    (i, i + 1, t)
}

pub fn clahe(image: &ScalarVolume, cfg: &CtPreprocessConfig) -> Result<ScalarVolume> {
    let [w, h, d] = image.dims();
    if d != 1 {
        return Err(Error::invalid("clahe expects a 2D image"));
    }
    if !(cfg.clahe_clip >= 1.0) || cfg.clahe_tiles == 0 {
        return Err(Error::invalid("clahe_clip must be ≥ 1 and clahe_tiles ≥ 1"));
    }
    let (min, max) = image.min_max();
    if !(max > min) {
        return Ok(image.clone());
    }
    let scale = 255.0 / (max - min);
    let levels: Vec<usize> = image
        .data()
        .iter()
        .map(|&v| ((v - min) * scale).round().clamp(0.0, 255.0) as usize)
        .collect();

    let tx = tile_bounds(w, cfg.clahe_tiles.min(w));
    let ty = tile_bounds(h, cfg.clahe_tiles.min(h));
    let mut luts = vec![[0.0f64; 256]; tx.len() * ty.len()];
    for (j, &(y0, y1)) in ty.iter().enumerate() {
        for (i, &(x0, x1)) in tx.iter().enumerate() {
            let mut hist = [0u32; 256];
            for y in y0..y1 {
                for x in x0..x1 {
                    hist[levels[y * w + x]] += 1;
                }
            }
            let pixels = ((x1 - x0) * (y1 - y0)) as u32;
            let limit = ((cfg.clahe_clip * pixels as f64 / 256.0) as u32).max(1);
            clip_histogram(&mut hist, limit);
            let lut = &mut luts[j * tx.len() + i];
            let mut cdf = 0u32;
            for l in 0..256 {
                cdf += hist[l];
                lut[l] = cdf as f64 * 255.0 / pixels as f64;
            }
        }
    }

    let cx: Vec<f64> = tx.iter().map(|&(a, b)| (a + b - 1) as f64 / 2.0).collect();
    let cy: Vec<f64> = ty.iter().map(|&(a, b)| (a + b - 1) as f64 / 2.0).collect();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let (j0, j1, v) = blend(y as f64, &cy);
        for x in 0..w {
            let (i0, i1, u) = blend(x as f64, &cx);
            let l = levels[y * w + x];
            let at = |i: usize, j: usize| luts[j * tx.len() + i][l];
            let top = at(i0, j0) * (1.0 - u) + at(i1, j0) * u;
            let bottom = at(i0, j1) * (1.0 - u) + at(i1, j1) * u;
            let mapped = (top * (1.0 - v) + bottom * v).clamp(0.0, 255.0);
            out.push(min + mapped / scale);
        }
    }
    image.with_data(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn constant_image_unchanged() {
        let img = ScalarVolume::image(20, 20, vec![42.0; 400]).unwrap();
        assert_eq!(clahe(&img, &CtPreprocessConfig::default()).unwrap(), img);
    }

    #[test]
    fn output_within_input_range() {
        let mut rng = SplitMix64::new(9);
        let img = ScalarVolume::image(50, 40, (0..2000).map(|_| rng.uniform(-20.0, 80.0)).collect()).unwrap();
        let (lo, hi) = img.min_max();
        let out = clahe(&img, &CtPreprocessConfig::default()).unwrap();
        let (olo, ohi) = out.min_max();
        assert!(olo >= lo && ohi <= hi);
    }

    #[test]
    fn stretches_low_contrast_levels() {
        // Two close levels mixed in every tile, range pinned by two extreme
        // pixels.
        let n = 128;
        let mut rng = SplitMix64::new(21);
        let mut data: Vec<f64> = (0..n * n)
            .map(|_| if rng.below(2) == 0 { 120.0 } else { 130.0 })
            .collect();
        data[0] = 0.0;
        data[n * n - 1] = 255.0;
        let img = ScalarVolume::image(n, n, data.clone()).unwrap();
        let out = clahe(&img, &CtPreprocessConfig::default()).unwrap();
        let mean_of = |level: f64| {
            let v: Vec<f64> = data
                .iter()
                .zip(out.data())
                .filter(|(&d, _)| d == level)
                .map(|(_, &o)| o)
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let separation = mean_of(130.0) - mean_of(120.0);
        assert!(separation >= 10.0, "separation {separation}");
    }

    #[test]
    fn clipping_bounds_and_mass() {
        let mut rng = SplitMix64::new(4);
        for _ in 0..50 {
            let mut hist = [0u32; 256];
            for _ in 0..4000 {
                hist[(rng.below(16) * rng.below(16)).min(255)] += 1;
            }
            let total: u32 = hist.iter().sum();
            let limit = 1 + rng.below(60) as u32;
            let mut clipped = hist;
            let excess: u32 = hist.iter().map(|&h| h.saturating_sub(limit)).sum();
            clip_histogram(&mut clipped, limit);
            assert_eq!(clipped.iter().sum::<u32>(), total);
            let batch = excess / 256;
            assert!(clipped.iter().all(|&h| h <= limit + batch + 1));
        }
    }
}
