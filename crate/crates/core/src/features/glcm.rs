//! Gray-level co-occurrence texture features.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::ScalarVolume;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GlcmConfig {
    pub distances: Vec<usize>,
    pub angles: Vec<u32>,
    pub levels: usize,
    pub symmetric: bool,
    pub normalized: bool,
}

impl Default for GlcmConfig {
    fn default() -> Self {
        Self {
            distances: vec![2, 5, 7, 10, 15],
            angles: vec![0, 45, 90, 135],
            levels: 32,
            symmetric: true,
            normalized: true,
        }
    }
}

impl GlcmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.distances.is_empty() || self.distances.contains(&0) {
            return Err(Error::invalid("GLCM distances must be non-empty and ≥ 1"));
        }
        if self.angles.is_empty() || self.angles.iter().any(|a| ![0, 45, 90, 135].contains(a)) {
            return Err(Error::invalid("GLCM angles must be drawn from {0, 45, 90, 135}"));
        }
        if self.levels < 2 {
            return Err(Error::invalid("GLCM needs at least 2 levels"));
        }
        Ok(())
    }

    pub fn feature_count(&self) -> usize {
        self.distances.len() * self.angles.len() * GLCM_FEATURES.len()
    }
}

pub const GLCM_FEATURES: [&str; 4] = ["contrast", "homogeneity", "energy", "correlation"];

/// Pixel offset `(dx, dy)` for distance `d` at `angle` degrees, y pointing down.
pub fn glcm_offset(d: usize, angle: u32) -> (isize, isize) {
    let t = (angle as f64).to_radians();
    let d = d as f64;
    ((d * t.cos()).round() as isize, -(d * t.sin()).round() as isize)
}

/// Quantises to `levels` bins over the masked min–max range; flat input maps to 0.
pub fn quantize(gray: &ScalarVolume, mask: &[bool], levels: usize) -> Vec<usize> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (&v, &m) in gray.data().iter().zip(mask) {
        if m {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    gray.data()
        .iter()
        .map(|&v| {
            if hi > lo {
                (((v - lo) / (hi - lo) * levels as f64).floor().max(0.0) as usize).min(levels - 1)
            } else {
                0
            }
        })
        .collect()
}

/// Co-occurrence matrix (row-major `levels²`) over pairs with both ends in the mask.
pub fn glcm_matrix(
    q: &[usize],
    mask: &[bool],
    width: usize,
    height: usize,
    offset: (isize, isize),
    cfg: &GlcmConfig,
) -> Vec<f64> {
    let (levels, symmetric) = (cfg.levels, cfg.symmetric);
    let mut m = vec![0.0; levels * levels];
    for y in 0..height as isize {
        let ny = y + offset.1;
        if ny < 0 || ny >= height as isize {
            continue;
        }
        for x in 0..width as isize {
            let nx = x + offset.0;
            if nx < 0 || nx >= width as isize {
                continue;
            }
            let a = y as usize * width + x as usize;
            let b = ny as usize * width + nx as usize;
            if mask[a] && mask[b] {
                m[q[a] * levels + q[b]] += 1.0;
                if symmetric {
                    m[q[b] * levels + q[a]] += 1.0;
                }
            }
        }
    }
    if cfg.normalized {
        let total: f64 = m.iter().sum();
        if total > 0.0 {
            m.iter_mut().for_each(|v| *v /= total);
        }
    }
    m
}

/// Contrast, homogeneity, energy and correlation of a normalised matrix.
pub fn glcm_props(p: &[f64], levels: usize) -> [f64; 4] {
    let (mut mi, mut mj) = (0.0, 0.0);
    for i in 0..levels {
        for j in 0..levels {
            let v = p[i * levels + j];
            mi += i as f64 * v;
            mj += j as f64 * v;
        }
    }
    let (mut con, mut hom, mut ene, mut vi, mut vj, mut cov) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..levels {
        for j in 0..levels {
            let v = p[i * levels + j];
            let d = i as f64 - j as f64;
            con += v * d * d;
            hom += v / (1.0 + d * d);
            ene += v * v;
            let (di, dj) = (i as f64 - mi, j as f64 - mj);
            vi += di * di * v;
            vj += dj * dj * v;
            cov += di * dj * v;
        }
    }
    let corr = if vi > 0.0 && vj > 0.0 {
        cov / (vi.sqrt() * vj.sqrt())
    } else {
        0.0
    };
    [con, hom, ene, corr]
}

/// Features ordered by distance, then angle, then feature name.
pub fn glcm_features(gray: &ScalarVolume, mask: &[bool], cfg: &GlcmConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let [w, h, depth] = gray.dims();
    if depth != 1 {
        return Err(Error::invalid("GLCM features need a 2D image"));
    }
    if mask.len() != w * h {
        return Err(Error::Geometry("mask size does not match image".into()));
    }
    let q = quantize(gray, mask, cfg.levels);
    let mut out = Vec::with_capacity(cfg.feature_count());
    for &d in &cfg.distances {
        for &a in &cfg.angles {
            let m = glcm_matrix(&q, mask, w, h, glcm_offset(d, a), cfg);
            if m.iter().all(|&v| v == 0.0) {
                log::warn!("no pixel pairs at distance {d}, angle {a}; block set to zero");
                out.extend([0.0; 4]);
            } else {
                out.extend(glcm_props(&m, cfg.levels));
            }
        }
    }
    Ok(out)
}

pub fn glcm_names(cfg: &GlcmConfig) -> Vec<String> {
    let mut names = Vec::with_capacity(cfg.feature_count());
    for d in &cfg.distances {
        for a in &cfg.angles {
            for f in GLCM_FEATURES {
                names.push(format!("glcm_d{d}_a{a}_{f}"));
            }
        }
    }
    names
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets() {
        assert_eq!(glcm_offset(1, 0), (1, 0));
        assert_eq!(glcm_offset(1, 90), (0, -1));
        assert_eq!(glcm_offset(2, 45), (1, -1));
        assert_eq!(glcm_offset(5, 135), (-4, -4));
    }

    #[test]
    fn two_by_two_example() {
        let img = ScalarVolume::image(2, 2, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let cfg = GlcmConfig {
            distances: vec![1],
            angles: vec![0],
            levels: 2,
            ..Default::default()
        };
        let q = quantize(&img, &[true; 4], 2);
        let m = glcm_matrix(&q, &[true; 4], 2, 2, (1, 0), &cfg);
        assert_eq!(m, vec![0.5, 0.0, 0.0, 0.5]);
        let f = glcm_features(&img, &[true; 4], &cfg).unwrap();
        assert_eq!(&f[..3], &[0.0, 1.0, 0.5]);
    }

    #[test]
    fn constant_image_blocks() {
        let img = ScalarVolume::image(20, 20, vec![7.0; 400]).unwrap();
        let f = glcm_features(&img, &[true; 400], &GlcmConfig::default()).unwrap();
        assert_eq!(f.len(), 80);
        for b in f.chunks(4) {
            assert_eq!(b, &[0.0, 1.0, 1.0, 0.0]);
        }
    }

    #[test]
    fn too_small_image_gives_zero_blocks() {
        let img = ScalarVolume::image(3, 3, (0..9).map(f64::from).collect()).unwrap();
        let cfg = GlcmConfig {
            distances: vec![5],
            ..Default::default()
        };
        let f = glcm_features(&img, &[true; 9], &cfg).unwrap();
        assert!(f.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_angles() {
        let cfg = GlcmConfig {
            angles: vec![30],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
