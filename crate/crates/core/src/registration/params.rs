//! Registration parameter maps and named preset sequences.

use serde::{Deserialize, Serialize};

use super::metric::Metric;
use crate::error::{Error, Result};
use crate::volume::Geometry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    Affine,
    Bspline,
}

/// Which fixed-image voxels drive the metric at each level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    Full,
    Random { sample_count: usize, seed: u64 },
}

fn default_levels() -> usize {
    3
}
fn default_schedule() -> Vec<usize> {
    vec![4, 2, 1]
}
fn default_iterations() -> Vec<usize> {
    vec![100, 100, 100]
}
fn default_grid() -> f64 {
    16.0
}
fn default_bins() -> usize {
    64
}
fn default_step_init() -> f64 {
    2.0
}
fn default_step_min() -> f64 {
    0.01
}
fn default_sampler() -> Sampler {
    Sampler::Full
}

/// One registration stage. Lengths (grid spacing, steps) are in mm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterMap {
    pub transform_kind: TransformKind,
    pub metric: Metric,
    #[serde(default = "default_levels")]
    pub pyramid_levels: usize,
    #[serde(default = "default_schedule")]
    pub pyramid_schedule: Vec<usize>,
    #[serde(default = "default_iterations")]
    pub iterations_per_level: Vec<usize>,
    #[serde(default = "default_grid")]
    pub grid_spacing_mm: f64,
    #[serde(default = "default_bins")]
    pub mi_bins: usize,
    #[serde(default)]
    pub bending_weight: f64,
    #[serde(default = "default_step_init")]
    pub step_init: f64,
    #[serde(default = "default_step_min")]
    pub step_min: f64,
    #[serde(default = "default_sampler")]
    pub sampler: Sampler,
}

impl ParameterMap {
    pub fn new(transform_kind: TransformKind, metric: Metric) -> Self {
        Self {
            transform_kind,
            metric,
            pyramid_levels: default_levels(),
            pyramid_schedule: default_schedule(),
            iterations_per_level: default_iterations(),
            grid_spacing_mm: default_grid(),
            mi_bins: default_bins(),
            bending_weight: 0.0,
            step_init: default_step_init(),
            step_min: default_step_min(),
            sampler: default_sampler(),
        }
    }

    /// Replaces the schedule, keeping `pyramid_levels` in step.
    pub fn with_schedule(mut self, schedule: &[usize], iterations: usize) -> Self {
        self.pyramid_levels = schedule.len();
        self.pyramid_schedule = schedule.to_vec();
        self.iterations_per_level = vec![iterations; schedule.len()];
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(format!("parameter map: {m}")));
        if self.pyramid_levels == 0 {
            return bad("pyramid_levels must be at least 1".into());
        }
        if self.pyramid_schedule.len() != self.pyramid_levels {
            return bad(format!(
                "pyramid_schedule has {} entries for {} levels",
                self.pyramid_schedule.len(),
                self.pyramid_levels
            ));
        }
        if self.iterations_per_level.len() != self.pyramid_levels {
            return bad(format!(
                "iterations_per_level has {} entries for {} levels",
                self.iterations_per_level.len(),
                self.pyramid_levels
            ));
        }
        if self.pyramid_schedule.contains(&0) || self.pyramid_schedule.windows(2).any(|w| w[1] > w[0]) {
            return bad("pyramid factors must be positive and non-increasing".into());
        }
        if self.iterations_per_level.contains(&0) {
            return bad("iterations must be at least 1".into());
        }
        if self.mi_bins < 8 {
            return bad("mi_bins must be at least 8".into());
        }
        if !(self.bending_weight >= 0.0) || !self.bending_weight.is_finite() {
            return bad("bending_weight must be a non-negative number".into());
        }
        if !(self.step_min > 0.0) || !(self.step_init >= self.step_min) || !self.step_init.is_finite() {
            return bad("need 0 < step_min <= step_init".into());
        }
        if self.transform_kind == TransformKind::Bspline && !(self.grid_spacing_mm > 0.0) {
            return bad("grid_spacing_mm must be positive".into());
        }
        if let Sampler::Random { sample_count: 0, .. } = self.sampler {
            return bad("sample_count must be positive".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let map: Self = serde_json::from_str(text)?;
        map.validate()?;
        Ok(map)
    }
}

pub fn validate_sequence(maps: &[ParameterMap]) -> Result<()> {
    if maps.is_empty() {
        return Err(Error::invalid("empty parameter map sequence"));
    }
    maps.iter().try_for_each(ParameterMap::validate)
}

/// Named stage sequences; lengths are expressed in voxels of the target
/// grid and converted to mm on lookup.
pub struct PresetLibrary;

impl PresetLibrary {
    pub const NAMES: [&'static str; 6] = [
        "affine-mse",
        "affine-mi",
        "bspline-mi",
        "bspline-ncc",
        "bspline-mattes",
        "combined-best",
    ];

    pub fn names() -> &'static [&'static str] {
        &Self::NAMES
    }

    pub fn get(name: &str, geom: &Geometry) -> Result<Vec<ParameterMap>> {
        let vox = geom.spacing.iter().cloned().fold(f64::MAX, f64::min);
        let affine = |metric| ParameterMap {
            step_init: 2.0 * vox,
            step_min: 0.01 * vox,
            sampler: Sampler::Random {
                sample_count: 20_000,
                seed: 17,
            },
            ..ParameterMap::new(TransformKind::Affine, metric).with_schedule(&[4, 2, 1], 100)
        };
        let bspline = |metric, grid_vox: f64, schedule: &[usize]| ParameterMap {
            grid_spacing_mm: grid_vox * vox,
            step_init: 1.0 * vox,
            step_min: 0.02 * vox,
            sampler: Sampler::Random {
                sample_count: 25_000,
                seed: 29,
            },
            ..ParameterMap::new(TransformKind::Bspline, metric).with_schedule(schedule, 60)
        };
        let maps = match name {
            "affine-mse" => vec![affine(Metric::Mse)],
            "affine-mi" => vec![affine(Metric::Mi)],
            "bspline-mi" => vec![bspline(Metric::Mi, 16.0, &[4, 2, 1])],
            "bspline-ncc" => vec![bspline(Metric::Ncc, 16.0, &[4, 2, 1])],
            "bspline-mattes" => vec![ParameterMap {
                mi_bins: 32,
                ..bspline(Metric::Mi, 16.0, &[4, 2, 1])
            }],
            "combined-best" => vec![
                affine(Metric::Mi),
                ParameterMap {
                    bending_weight: vox * vox,
                    ..bspline(Metric::Ncc, 16.0, &[4, 2, 1])
                },
                ParameterMap {
                    bending_weight: vox * vox,
                    ..bspline(Metric::Ncc, 8.0, &[2, 1])
                },
            ],
            other => {
                return Err(Error::invalid(format!(
                    "unknown preset '{other}' (known: {})",
                    Self::NAMES.join(", ")
                )))
            }
        };
        validate_sequence(&maps)?;
        Ok(maps)
    }
}
