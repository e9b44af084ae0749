//! Synthetic dermoscopy-like lesion images with class-dependent colour,
//! border irregularity and texture.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::color::hsv_to_rgb_f;
use crate::rng::SplitMix64;
use crate::volume::ColorImage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LesionClassKnobs {
    /// Hue in degrees.
    pub hue: f64,
    /// Relative radial border modulation.
    pub irregularity: f64,
    /// Texture frequency in radians per pixel.
    pub texture_frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LesionDatasetConfig {
    pub classes: Vec<LesionClassKnobs>,
    pub counts: Vec<usize>,
    pub size: usize,
    /// Per-sample hue jitter half-width in degrees.
    pub hue_jitter: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for LesionDatasetConfig {
    fn default() -> Self {
        Self {
            classes: vec![
                LesionClassKnobs {
                    hue: 25.0,
                    irregularity: 0.03,
                    texture_frequency: 0.15,
                },
                LesionClassKnobs {
                    hue: 340.0,
                    irregularity: 0.12,
                    texture_frequency: 0.45,
                },
                LesionClassKnobs {
                    hue: 270.0,
                    irregularity: 0.22,
                    texture_frequency: 0.9,
                },
            ],
            counts: vec![80, 60, 20],
            size: 128,
            hue_jitter: 6.0,
            noise_sigma: 4.0,
            seed: 11,
        }
    }
}

/// Circular hue distance in degrees.
pub fn hue_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

impl LesionDatasetConfig {
    pub fn validate(&self) -> Result<()> {
        let k = self.classes.len();
        if !(2..=3).contains(&k) {
            return Err(Error::invalid("lesion dataset needs 2 or 3 classes"));
        }
        if self.counts.len() != k || self.counts.iter().any(|&c| c < 4) {
            return Err(Error::invalid("need one count of at least 4 per class"));
        }
        if self.size < 32 {
            return Err(Error::invalid("lesion image size must be at least 32"));
        }
        for i in 0..k {
            for j in i + 1..k {
                let (a, b) = (&self.classes[i], &self.classes[j]);
                if a.hue == b.hue && a.irregularity == b.irregularity && a.texture_frequency == b.texture_frequency {
                    return Err(Error::invalid("class knobs must differ between classes"));
                }
            }
        }
        if !(self.hue_jitter >= 0.0) || !(self.noise_sigma >= 0.0) {
            return Err(Error::invalid("jitter and noise must be non-negative"));
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LesionDataset {
    pub images: Vec<ColorImage>,
    pub masks: Vec<Vec<bool>>,
    pub labels: Vec<usize>,
    /// Lesion hue actually drawn for each sample (degrees).
    pub hues: Vec<f64>,
}

/// One lesion image for class `class`, from its own random stream.
pub fn gen_lesion(cfg: &LesionDatasetConfig, class: usize, rng: &mut SplitMix64) -> (ColorImage, Vec<bool>, f64) {
    let knobs = &cfg.classes[class];
    let n = cfg.size;
    let s = n as f64;
    let hue = (knobs.hue + rng.uniform(-cfg.hue_jitter, cfg.hue_jitter)).rem_euclid(360.0);
    let sat = rng.uniform(0.55, 0.7);
    let val = rng.uniform(0.4, 0.5);
    let skin = [
        rng.uniform(18.0, 30.0),
        rng.uniform(0.25, 0.35),
        rng.uniform(0.85, 0.92),
    ];
    let cx = s / 2.0 + rng.uniform(-0.06, 0.06) * s;
    let cy = s / 2.0 + rng.uniform(-0.06, 0.06) * s;
    let a = rng.uniform(0.2, 0.3) * s;
    let b = a * rng.uniform(0.7, 1.0);
    let theta = rng.uniform(0.0, PI);
    let phases = [rng.uniform(0.0, TAU), rng.uniform(0.0, TAU)];
    let tex_phase = [rng.uniform(0.0, TAU), rng.uniform(0.0, TAU)];
    let (st, ct) = theta.sin_cos();
    let mut data = Vec::with_capacity(3 * n * n);
    let mut mask = Vec::with_capacity(n * n);
    for y in 0..n {
        for x in 0..n {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            let (u, v) = (ct * dx + st * dy, -st * dx + ct * dy);
            let ang = v.atan2(u);
            let border =
                1.0 + knobs.irregularity * (0.6 * (3.0 * ang + phases[0]).sin() + 0.4 * (7.0 * ang + phases[1]).sin());
            let inside = (u / a).powi(2) + (v / b).powi(2) <= border * border;
            mask.push(inside);
            let hsv = if inside {
                let f = knobs.texture_frequency;
                let t = (f * x as f64 + tex_phase[0]).sin() * (f * y as f64 + tex_phase[1]).sin();
                [hue, sat, (val * (1.0 + 0.25 * t)).clamp(0.0, 1.0)]
            } else {
                skin
            };
            for c in hsv_to_rgb_f(hsv) {
                data.push((c * 255.0 + cfg.noise_sigma * rng.normal()).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    (ColorImage::new(n, n, data).expect("sized buffer"), mask, hue)
}

/// Class-major dataset; sample `i` draws from stream `i` of the seed.
pub fn gen_lesion_dataset(cfg: &LesionDatasetConfig) -> Result<LesionDataset> {
    cfg.validate()?;
    let mut out = LesionDataset {
        images: Vec::with_capacity(cfg.total()),
        masks: Vec::with_capacity(cfg.total()),
        labels: Vec::with_capacity(cfg.total()),
        hues: Vec::with_capacity(cfg.total()),
    };
    let mut index = 0u64;
    for (class, &count) in cfg.counts.iter().enumerate() {
        for _ in 0..count {
            let (img, mask, hue) = gen_lesion(cfg, class, &mut SplitMix64::derive(cfg.seed, index));
            out.images.push(img);
            out.masks.push(mask);
            out.labels.push(class);
            out.hues.push(hue);
            index += 1;
        }
    }
    Ok(out)
}
