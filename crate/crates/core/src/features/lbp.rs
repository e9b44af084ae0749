//! Rotation-sampled local binary patterns with the uniform mapping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::ScalarVolume;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LbpConfig {
    pub radii: Vec<usize>,
}

impl Default for LbpConfig {
    fn default() -> Self {
        Self {
            radii: (1..=9).collect(),
        }
    }
}

impl LbpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.radii.is_empty() || self.radii.contains(&0) {
            return Err(Error::invalid("LBP radii must be non-empty and ≥ 1"));
        }
        Ok(())
    }

    pub fn points(radius: usize) -> usize {
        8 * radius
    }

    /// `P + 2` bins per radius: uniform patterns by bit count, then one
    /// catch-all bin.
    pub fn feature_count(&self) -> usize {
        self.radii.iter().map(|&r| Self::points(r) + 2).sum()
    }
}

/// Neighbour offsets `(dx, dy)` on the circle of `radius`, rounded to 1e-6
/// so axis-aligned points land exactly on the grid.
pub fn lbp_offsets(radius: usize) -> Vec<(f64, f64)> {
    let p = LbpConfig::points(radius);
    let round = |v: f64| (v * 1e6).round() / 1e6;
    (0..p)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / p as f64;
            (round(radius as f64 * t.cos()), round(-(radius as f64) * t.sin()))
        })
        .collect()
}

/// Bilinear sample with coordinates clamped to the image.
pub fn bilinear_clamped(data: &[f64], width: usize, height: usize, x: f64, y: f64) -> f64 {
    let x = x.clamp(0.0, (width - 1) as f64);
    let y = y.clamp(0.0, (height - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(width - 1), (y0 + 1).min(height - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let at = |xx: usize, yy: usize| data[yy * width + xx];
    let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
    let bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Uniform-mapped code: number of set bits if the circular pattern has at
/// most two 0/1 transitions, else `P + 1`.
pub fn uniform_code(bits: &[bool]) -> usize {
    let p = bits.len();
    let transitions = (0..p).filter(|&k| bits[k] != bits[(k + 1) % p]).count();
    if transitions <= 2 {
        bits.iter().filter(|&&b| b).count()
    } else {
        p + 1
    }
}

/// Per-radius normalised histograms of uniform codes over masked pixels.
pub fn lbp_features(gray: &ScalarVolume, mask: &[bool], cfg: &LbpConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let [w, h, depth] = gray.dims();
    if depth != 1 {
        return Err(Error::invalid("LBP features need a 2D image"));
    }
    if mask.len() != w * h {
        return Err(Error::Geometry("mask size does not match image".into()));
    }
    let n = mask.iter().filter(|&&m| m).count();
    if n == 0 {
        return Err(Error::invalid("LBP needs a non-empty mask"));
    }
    let data = gray.data();
    let mut out = Vec::with_capacity(cfg.feature_count());
    let mut bits = Vec::new();
    for &r in &cfg.radii {
        let offsets = lbp_offsets(r);
        let p = offsets.len();
        let mut hist = vec![0.0; p + 2];
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if !mask[i] {
                    continue;
                }
                let c = data[i];
                bits.clear();
                bits.extend(
                    offsets
                        .iter()
                        .map(|&(dx, dy)| bilinear_clamped(data, w, h, x as f64 + dx, y as f64 + dy) >= c),
                );
                hist[uniform_code(&bits)] += 1.0;
            }
        }
        out.extend(hist.iter().map(|v| v / n as f64));
    }
    Ok(out)
}

pub fn lbp_names(cfg: &LbpConfig) -> Vec<String> {
    let mut names = Vec::with_capacity(cfg.feature_count());
    for &r in &cfg.radii {
        let p = LbpConfig::points(r);
        for b in 0..=p {
            names.push(format!("lbp_r{r}_u{b}"));
        }
        names.push(format!("lbp_r{r}_nonuniform"));
    }
    names
}
