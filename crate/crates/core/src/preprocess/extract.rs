//! Axial slice and patch extraction for 2D training data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{LabelVolume, ScalarVolume};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractionConfig {
    pub patch_size: usize,
    pub min_foreground_fraction: f64,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            patch_size: 32,
            min_foreground_fraction: 0.25,
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0 {
            return Err(Error::invalid("patch_size must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.min_foreground_fraction) {
            return Err(Error::invalid("min_foreground_fraction must be in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SlicePair {
    pub z: usize,
    pub image: ScalarVolume,
    pub labels: Option<LabelVolume>,
}

#[derive(Debug, Clone)]
pub struct Patch {
    /// Top-left pixel of the tile.
    pub x: usize,
    pub y: usize,
    pub image: ScalarVolume,
}

fn nonzero_fraction(values: &[f64]) -> f64 {
    values.iter().filter(|&&v| v != 0.0).count() as f64 / values.len() as f64
}

/// Axial slices whose non-zero fraction reaches the threshold, ascending in z.
pub fn extract_slices(
    vol: &ScalarVolume,
    labels: Option<&LabelVolume>,
    cfg: &ExtractionConfig,
) -> Result<Vec<SlicePair>> {
    cfg.validate()?;
    if let Some(l) = labels {
        vol.geometry().ensure_same(l.geometry(), "extract_slices")?;
    }
    Ok((0..vol.dims()[2])
        .filter_map(|z| {
            let image = vol.slice(z);
            (nonzero_fraction(image.data()) >= cfg.min_foreground_fraction).then(|| SlicePair {
                z,
                image,
                labels: labels.map(|l| l.slice(z)),
            })
        })
        .collect())
}

/// Non-overlapping square tiles from `(0, 0)` in row-major order; partial
/// edge tiles are dropped.
pub fn extract_patches(slice: &ScalarVolume, cfg: &ExtractionConfig) -> Result<Vec<Patch>> {
    cfg.validate()?;
    let [w, h, d] = slice.dims();
    if d != 1 {
        return Err(Error::invalid("extract_patches expects a 2D slice"));
    }
    let s = cfg.patch_size;
    let mut out = Vec::new();
    for ty in 0..h / s {
        for tx in 0..w / s {
            let mut data = Vec::with_capacity(s * s);
            for y in ty * s..(ty + 1) * s {
                data.extend_from_slice(&slice.data()[y * w + tx * s..y * w + (tx + 1) * s]);
            }
            if nonzero_fraction(&data) >= cfg.min_foreground_fraction {
                out.push(Patch {
                    x: tx * s,
                    y: ty * s,
                    image: ScalarVolume::image(s, s, data)?,
                });
            }
        }
    }
    Ok(out)
}
