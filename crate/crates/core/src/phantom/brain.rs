//! Nested-ellipsoid brain phantom and randomly posed atlas populations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registration::{resample, resample_labels, AffineTransform, Interpolation, Stage, TransformChain};
use crate::rng::SplitMix64;
use crate::volume::{tissue, Geometry, LabelVolume, ScalarVolume};

/// Brain phantom parameters. Radii are fractions of the half-extent per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BrainPhantomConfig {
    pub dims: [usize; 3],
    /// CSF, GM, WM means as fractions of the intensity range.
    pub class_means: [f64; 3],
    pub noise_sigma: f64,
    pub bias_order: usize,
    pub bias_amplitude: f64,
    pub head_radius: f64,
    pub gm_radius: f64,
    pub wm_radius: f64,
    pub ventricle_radius: f64,
    pub seed: u64,
}

impl Default for BrainPhantomConfig {
    fn default() -> Self {
        Self {
            dims: [64, 64, 64],
            class_means: [0.25, 0.55, 0.85],
            noise_sigma: 0.02,
            bias_order: 2,
            bias_amplitude: 0.1,
            head_radius: 0.9,
            gm_radius: 0.78,
            wm_radius: 0.58,
            ventricle_radius: 0.14,
            seed: 1,
        }
    }
}

impl BrainPhantomConfig {
    pub fn validate(&self) -> Result<()> {
        let m = self.class_means;
        if !(m[0] < m[1] && m[1] < m[2]) || m[0] <= 0.0 {
            return Err(Error::invalid("class means must be positive and strictly increasing"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::invalid("noise_sigma must be non-negative"));
        }
        if !(self.bias_amplitude >= 0.0 && self.bias_amplitude < 1.0) {
            return Err(Error::invalid("bias_amplitude must lie in [0, 1)"));
        }
        let r = [self.ventricle_radius, self.wm_radius, self.gm_radius, self.head_radius];
        if r.iter().any(|&v| !(v > 0.0)) || r.windows(2).any(|w| w[0] >= w[1]) || self.head_radius > 1.0 {
            return Err(Error::invalid("radii must satisfy 0 < ventricle < wm < gm < head <= 1"));
        }
        if self.dims.iter().any(|&d| d < 8) {
            return Err(Error::invalid("phantom dims must be at least 8"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrainPhantom {
    pub intensity: ScalarVolume,
    pub labels: LabelVolume,
    pub bias: ScalarVolume,
}

/// Normalised coordinates in [-1, 1] per axis (0 on flat axes).
fn unit_coords(g: &Geometry, i: usize) -> [f64; 3] {
    let c = g.coords(i);
    let mut u = [0.0; 3];
    for a in 0..3 {
        if g.dims[a] > 1 {
            u[a] = 2.0 * c[a] as f64 / (g.dims[a] - 1) as f64 - 1.0;
        }
    }
    u
}

/// Smooth multiplicative field `1 + amplitude·p(x)` with `max |p| = 1`.
fn bias_field(g: &Geometry, order: usize, amplitude: f64, rng: &mut SplitMix64) -> Vec<f64> {
    let mut exps = Vec::new();
    for i in 0..=order {
        for j in 0..=order - i {
            for k in 0..=order - i - j {
                if i + j + k > 0 {
                    exps.push((i as i32, j as i32, k as i32, rng.uniform(-1.0, 1.0)));
                }
            }
        }
    }
    let poly: Vec<f64> = (0..g.len())
        .map(|idx| {
            let u = unit_coords(g, idx);
            exps.iter()
                .map(|&(i, j, k, c)| c * u[0].powi(i) * u[1].powi(j) * u[2].powi(k))
                .sum()
        })
        .collect();
    let peak = poly.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak > 0.0 { amplitude / peak } else { 0.0 };
    poly.into_iter().map(|p| 1.0 + scale * p).collect()
}

/// Tissue class at normalised position `u`.
fn class_at(cfg: &BrainPhantomConfig, u: [f64; 3]) -> u16 {
    let r = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
    if r > cfg.head_radius {
        return tissue::BACKGROUND;
    }
    if r > cfg.gm_radius {
        return tissue::CSF;
    }
    if r > cfg.wm_radius {
        return tissue::GM;
    }
    // two ventricles either side of the midline, slightly anterior
    let off = 0.45 * cfg.wm_radius;
    for side in [-1.0, 1.0] {
        let (dx, dy, dz) = (u[0] - side * off * 0.5, u[1] + 0.2 * cfg.wm_radius, u[2]);
        let vr = cfg.ventricle_radius;
        if (dx / (0.7 * vr)).powi(2) + (dy / (1.6 * vr)).powi(2) + (dz / vr).powi(2) <= 1.0 {
            return tissue::CSF;
        }
    }
    tissue::WM
}

/// Nested ellipsoids (CSF rim, GM shell, WM core with ventricles) with
/// Gaussian noise and a polynomial bias field; background is exactly 0.
pub fn gen_brain_phantom(cfg: &BrainPhantomConfig) -> Result<BrainPhantom> {
    cfg.validate()?;
    let g = Geometry::unit(cfg.dims);
    let mut rng = SplitMix64::new(cfg.seed);
    let bias = bias_field(
        &g,
        cfg.bias_order,
        cfg.bias_amplitude,
        &mut SplitMix64::derive(cfg.seed, 1),
    );
    let mut labels = Vec::with_capacity(g.len());
    let mut values = Vec::with_capacity(g.len());
    for i in 0..g.len() {
        let c = class_at(cfg, unit_coords(&g, i));
        labels.push(c);
        let v = if c == tissue::BACKGROUND {
            0.0
        } else {
            let clean = cfg.class_means[c as usize - 1] + cfg.noise_sigma * rng.normal();
            (clean * bias[i]).max(1e-3)
        };
        values.push(v);
    }
    Ok(BrainPhantom {
        intensity: ScalarVolume::new(g, values)?,
        labels: LabelVolume::new(g, labels, tissue::CLASS_COUNT)?,
        bias: ScalarVolume::new(g, bias)?,
    })
}

/// Bounds of the random rigid poses in an atlas population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineRanges {
    pub max_translation_vox: f64,
    pub max_rotation_deg: f64,
}

impl Default for AffineRanges {
    fn default() -> Self {
        Self {
            max_translation_vox: 5.0,
            max_rotation_deg: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtlasMember {
    pub intensity: ScalarVolume,
    pub labels: LabelVolume,
    /// Maps member-space points to base-space points.
    pub chain: TransformChain,
}

/// Random pose within `ranges` about the grid centre. Translation is drawn
/// inside a ball so its length never exceeds the bound.
pub fn random_pose(geom: &Geometry, ranges: AffineRanges, rng: &mut SplitMix64) -> AffineTransform {
    let flat = geom.is_2d();
    let rot = ranges.max_rotation_deg.to_radians();
    let mut angles = [rng.uniform(-rot, rot), rng.uniform(-rot, rot), rng.uniform(-rot, rot)];
    let mut t = [0.0; 3];
    loop {
        for v in t.iter_mut() {
            *v = rng.uniform(-1.0, 1.0);
        }
        if flat {
            t[2] = 0.0;
        }
        if t.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
            break;
        }
    }
    if flat {
        angles[0] = 0.0;
        angles[1] = 0.0;
    }
    let s = geom.spacing;
    let tr = [
        t[0] * ranges.max_translation_vox * s[0],
        t[1] * ranges.max_translation_vox * s[1],
        t[2] * ranges.max_translation_vox * s[2],
    ];
    AffineTransform::rigid(angles, tr, geom.center())
}

/// `n` members, each the base resampled under its own random pose.
pub fn gen_atlas_population(
    base: &BrainPhantom,
    n: usize,
    ranges: AffineRanges,
    seed: u64,
) -> Result<Vec<AtlasMember>> {
    if n == 0 {
        return Err(Error::invalid("population needs at least one member"));
    }
    let g = *base.intensity.geometry();
    (0..n)
        .map(|i| {
            let mut rng = SplitMix64::derive(seed, i as u64);
            let chain = TransformChain::from_stages(vec![Stage::Affine(random_pose(&g, ranges, &mut rng))]);
            Ok(AtlasMember {
                intensity: resample(&base.intensity, &chain, &g, Interpolation::Linear)?,
                labels: resample_labels(&base.labels, &chain, &g, Interpolation::Nearest)?,
                chain,
            })
        })
        .collect()
}

/// A population of distinct subjects: per-case radii jitter, random pose
/// and fresh noise on top of a shared phantom recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BrainSuiteConfig {
    pub phantom: BrainPhantomConfig,
    pub cases: usize,
    /// Relative jitter applied independently to each radius.
    pub radius_jitter: f64,
    pub pose: AffineRanges,
    pub seed: u64,
}

impl Default for BrainSuiteConfig {
    fn default() -> Self {
        Self {
            phantom: BrainPhantomConfig {
                noise_sigma: 0.1,
                ..Default::default()
            },
            cases: 5,
            radius_jitter: 0.04,
            pose: AffineRanges::default(),
            seed: 5,
        }
    }
}

impl BrainSuiteConfig {
    pub fn validate(&self) -> Result<()> {
        self.phantom.validate()?;
        if self.cases == 0 {
            return Err(Error::invalid("suite needs at least one case"));
        }
        if !(0.0..0.2).contains(&self.radius_jitter) {
            return Err(Error::invalid("radius_jitter must lie in [0, 0.2)"));
        }
        Ok(())
    }
}

pub fn gen_brain_suite(cfg: &BrainSuiteConfig) -> Result<Vec<BrainPhantom>> {
    cfg.validate()?;
    (0..cfg.cases)
        .map(|i| {
            let mut rng = SplitMix64::derive(cfg.seed, i as u64);
            let mut jit = |r: f64| r * (1.0 + rng.uniform(-cfg.radius_jitter, cfg.radius_jitter));
            let mut pc = BrainPhantomConfig {
                noise_sigma: 0.0,
                seed: cfg.seed.wrapping_add(i as u64),
                ..cfg.phantom.clone()
            };
            pc.head_radius = jit(pc.head_radius).min(1.0);
            pc.gm_radius = jit(pc.gm_radius);
            pc.wm_radius = jit(pc.wm_radius);
            pc.ventricle_radius = jit(pc.ventricle_radius);
            let clean = gen_brain_phantom(&pc)?;
            let g = *clean.intensity.geometry();
            let chain = TransformChain::from_stages(vec![Stage::Affine(random_pose(&g, cfg.pose, &mut rng))]);
            let labels = resample_labels(&clean.labels, &chain, &g, Interpolation::Nearest)?;
            let bias = resample(&clean.bias, &chain, &g, Interpolation::Linear)?;
            let posed = resample(&clean.intensity, &chain, &g, Interpolation::Linear)?;
            let mut noise = SplitMix64::derive(cfg.seed, 1000 + i as u64);
            let values = posed
                .data()
                .iter()
                .map(|&v| {
                    if v > 0.0 {
                        (v + cfg.phantom.noise_sigma * noise.normal()).max(1e-3)
                    } else {
                        0.0
                    }
                })
                .collect();
            Ok(BrainPhantom {
                intensity: posed.with_data(values)?,
                labels,
                bias,
            })
        })
        .collect()
}
