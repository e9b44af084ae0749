//! Colour-image augmentation: crops, rescaling, contrast, zoom and flips.
//! Every output keeps the input size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::volume::ColorImage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum AugmentOp {
    /// Keep the central `fraction` of each side, then resize back.
    CentralCrop { fraction: f64 },
    /// Resample down to `factor` of the size and back up.
    Rescale { factor: f64 },
    /// Stretch about the per-channel mean by a gain drawn from `[1, gain]`.
    Contrast { gain: f64 },
    /// Magnify about the centre by a factor drawn from `[min, max]`.
    Zoom { min: f64, max: f64 },
    FlipH {
        #[serde(default = "always")]
        probability: f64,
    },
    FlipV {
        #[serde(default = "always")]
        probability: f64,
    },
}

fn always() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentSpec {
    pub ops: Vec<AugmentOp>,
    pub seed: u64,
    pub copies: usize,
}

impl AugmentSpec {
    pub fn validate(&self) -> Result<()> {
        for op in &self.ops {
            match *op {
                AugmentOp::CentralCrop { fraction } if !(fraction > 0.0 && fraction <= 1.0) => {
                    return Err(Error::invalid("crop fraction must lie in (0, 1]"));
                }
                AugmentOp::Rescale { factor } if !(factor > 0.0 && factor <= 4.0) => {
                    return Err(Error::invalid("rescale factor must lie in (0, 4]"));
                }
                AugmentOp::Contrast { gain } if !(gain >= 1.0 && gain.is_finite()) => {
                    return Err(Error::invalid("contrast gain must be ≥ 1"));
                }
                AugmentOp::Zoom { min, max } if !(min > 0.5 && max < 1.5 && min <= max) => {
                    return Err(Error::invalid("zoom range must lie inside (0.5, 1.5)"));
                }
                AugmentOp::FlipH { probability } | AugmentOp::FlipV { probability }
                    if !(0.0..=1.0).contains(&probability) =>
                {
                    return Err(Error::invalid("flip probability must lie in [0, 1]"));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Bilinear sample of one channel with clamped coordinates.
fn sample(img: &ColorImage, x: f64, y: f64, c: usize) -> f64 {
    let (w, h) = (img.width(), img.height());
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let at = |xx: usize, yy: usize| img.pixel(xx, yy)[c] as f64;
    let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
    let bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Output pixel `(x, y)` of a `w × h` image reads source point `map(x, y)`.
fn remap(img: &ColorImage, w: usize, h: usize, map: impl Fn(f64, f64) -> (f64, f64)) -> ColorImage {
    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = map(x as f64, y as f64);
            for c in 0..3 {
                data.push(sample(img, sx, sy, c).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    ColorImage::new(w, h, data).expect("positive size")
}

/// Bilinear resize with pixel-centre alignment.
pub fn resize(img: &ColorImage, w: usize, h: usize) -> ColorImage {
    if (w, h) == (img.width(), img.height()) {
        return img.clone();
    }
    let sx = img.width() as f64 / w as f64;
    let sy = img.height() as f64 / h as f64;
    remap(img, w, h, |x, y| ((x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5))
}

pub fn flip_h(img: &ColorImage) -> ColorImage {
    let (w, h) = (img.width(), img.height());
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            out.set_pixel(x, y, img.pixel(w - 1 - x, y));
        }
    }
    out
}

pub fn flip_v(img: &ColorImage) -> ColorImage {
    let (w, h) = (img.width(), img.height());
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            out.set_pixel(x, y, img.pixel(x, h - 1 - y));
        }
    }
    out
}

pub fn central_crop(img: &ColorImage, fraction: f64) -> ColorImage {
    let (w, h) = (img.width(), img.height());
    let cw = ((w as f64 * fraction).round() as usize).clamp(1, w);
    let ch = ((h as f64 * fraction).round() as usize).clamp(1, h);
    if (cw, ch) == (w, h) {
        return img.clone();
    }
    let (x0, y0) = ((w - cw) / 2, (h - ch) / 2);
    let mut data = Vec::with_capacity(cw * ch * 3);
    for y in y0..y0 + ch {
        for x in x0..x0 + cw {
            data.extend(img.pixel(x, y));
        }
    }
    resize(&ColorImage::new(cw, ch, data).expect("non-empty crop"), w, h)
}

pub fn rescale(img: &ColorImage, factor: f64) -> ColorImage {
    let (w, h) = (img.width(), img.height());
    let sw = ((w as f64 * factor).round() as usize).max(1);
    let sh = ((h as f64 * factor).round() as usize).max(1);
    resize(&resize(img, sw, sh), w, h)
}

/// Magnification about the image centre; factors below 1 pad by edge clamping.
pub fn zoom(img: &ColorImage, factor: f64) -> ColorImage {
    let (w, h) = (img.width(), img.height());
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    remap(img, w, h, |x, y| (cx + (x - cx) / factor, cy + (y - cy) / factor))
}

pub fn adjust_contrast(img: &ColorImage, gain: f64) -> ColorImage {
    let n = (img.width() * img.height()) as f64;
    let mut mean = [0.0; 3];
    for p in img.data().chunks_exact(3) {
        for c in 0..3 {
            mean[c] += p[c] as f64 / n;
        }
    }
    let data = img
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let m = mean[i % 3];
            (m + gain * (v as f64 - m)).round().clamp(0.0, 255.0) as u8
        })
        .collect();
    ColorImage::new(img.width(), img.height(), data).expect("same size")
}

/// `spec.copies` augmented images; copy `k` draws from its own seeded stream.
pub fn augment(img: &ColorImage, spec: &AugmentSpec) -> Result<Vec<ColorImage>> {
    spec.validate()?;
    Ok((0..spec.copies)
        .map(|k| {
            let mut rng = SplitMix64::derive(spec.seed, k as u64);
            let mut out = img.clone();
            for op in &spec.ops {
                out = match *op {
                    AugmentOp::CentralCrop { fraction } => central_crop(&out, fraction),
                    AugmentOp::Rescale { factor } => rescale(&out, factor),
                    AugmentOp::Contrast { gain } => adjust_contrast(&out, rng.uniform(1.0, gain)),
                    AugmentOp::Zoom { min, max } => zoom(&out, rng.uniform(min, max)),
                    AugmentOp::FlipH { probability } => {
                        if rng.next_f64() < probability {
                            flip_h(&out)
                        } else {
                            out
                        }
                    }
                    AugmentOp::FlipV { probability } => {
                        if rng.next_f64() < probability {
                            flip_v(&out)
                        } else {
                            out
                        }
                    }
                };
            }
            out
        })
        .collect())
}
