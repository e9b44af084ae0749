//! Axial lung CT slice with a gantry ring, plus a smoothly deformed
//! registration pair with landmark ground truth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registration::{sample_at, AffineTransform, Interpolation};
use crate::rng::SplitMix64;
use crate::volume::{LandmarkSet, ScalarVolume};

/// Lung slice geometry; lengths are fractions of the image size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LungSliceConfig {
    pub size: usize,
    pub fov_radius: f64,
    pub body_axes: [f64; 2],
    pub lung_axes: [f64; 2],
    pub lung_offset: f64,
    pub ring_radius: f64,
    pub ring_thickness_px: f64,
    pub air: f64,
    pub body: f64,
    pub lung: f64,
    pub ring: f64,
    pub noise_sigma: f64,
    /// Bright vessel-like spots inside the lungs.
    pub vessels: usize,
    pub seed: u64,
}

impl Default for LungSliceConfig {
    fn default() -> Self {
        Self {
            size: 256,
            fov_radius: 0.49,
            body_axes: [0.36, 0.27],
            lung_axes: [0.12, 0.18],
            lung_offset: 0.16,
            ring_radius: 0.44,
            ring_thickness_px: 3.0,
            air: 0.1,
            body: 0.7,
            lung: 0.15,
            ring: 0.75,
            noise_sigma: 0.01,
            vessels: 40,
            seed: 7,
        }
    }
}

impl LungSliceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.size < 32 {
            return Err(Error::invalid("lung slice size must be at least 32"));
        }
        let ring_inner = self.ring_radius * self.size as f64 - self.ring_thickness_px / 2.0;
        let body_outer = self.body_axes[0].max(self.body_axes[1]) * self.size as f64;
        if ring_inner <= body_outer + 1.0 {
            return Err(Error::invalid("gantry ring must lie outside the body ellipse"));
        }
        if self.ring_radius * self.size as f64 + self.ring_thickness_px / 2.0 >= self.fov_radius * self.size as f64 {
            return Err(Error::invalid("gantry ring must lie inside the field of view"));
        }
        if self.lung_offset + self.lung_axes[0] >= self.body_axes[0] || self.lung_axes[1] >= self.body_axes[1] {
            return Err(Error::invalid("lungs must lie inside the body"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::invalid("noise_sigma must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LungSlice {
    pub image: ScalarVolume,
    pub body: Vec<bool>,
    pub lungs: Vec<bool>,
    pub ring: Vec<bool>,
}

/// Dark corners, bright body ellipse with two dark lungs, and a thin bright
/// ring between body and field-of-view edge.
pub fn gen_lung_slice(cfg: &LungSliceConfig) -> Result<LungSlice> {
    cfg.validate()?;
    let n = cfg.size;
    let s = n as f64;
    let c = (s - 1.0) / 2.0;
    let mut rng = SplitMix64::new(cfg.seed);
    let mut spots = Vec::with_capacity(cfg.vessels);
    while spots.len() < cfg.vessels {
        let side = if spots.len() % 2 == 0 { -1.0 } else { 1.0 };
        let (u, v) = (rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
        if u * u + v * v > 0.7 {
            continue;
        }
        let x = c + side * cfg.lung_offset * s + u * cfg.lung_axes[0] * s;
        let y = c + v * cfg.lung_axes[1] * s;
        spots.push((x, y, rng.uniform(1.0, 2.5), rng.uniform(0.15, 0.35)));
    }
    let mut image = Vec::with_capacity(n * n);
    let (mut body, mut lungs, mut ring) = (vec![false; n * n], vec![false; n * n], vec![false; n * n]);
    for y in 0..n {
        for x in 0..n {
            let (dx, dy) = (x as f64 - c, y as f64 - c);
            let r = (dx * dx + dy * dy).sqrt();
            let i = y * n + x;
            let in_body = (dx / (cfg.body_axes[0] * s)).powi(2) + (dy / (cfg.body_axes[1] * s)).powi(2) <= 1.0;
            let in_lung = [-1.0, 1.0].iter().any(|side| {
                let lx = dx - side * cfg.lung_offset * s;
                (lx / (cfg.lung_axes[0] * s)).powi(2) + (dy / (cfg.lung_axes[1] * s)).powi(2) <= 1.0
            });
            let in_ring = (r - cfg.ring_radius * s).abs() <= cfg.ring_thickness_px / 2.0;
            let v = if r > cfg.fov_radius * s {
                0.0
            } else if in_ring {
                ring[i] = true;
                cfg.ring
            } else if in_body {
                body[i] = true;
                if in_lung {
                    lungs[i] = true;
                    let vessel: f64 = spots
                        .iter()
                        .map(|&(sx, sy, w, a)| {
                            a * (-((x as f64 - sx).powi(2) + (y as f64 - sy).powi(2)) / (2.0 * w * w)).exp()
                        })
                        .sum();
                    cfg.lung + vessel.min(0.4)
                } else {
                    cfg.body
                }
            } else {
                cfg.air
            };
            let noisy = if v > 0.0 {
                (v + cfg.noise_sigma * rng.normal()).max(0.0)
            } else {
                0.0
            };
            image.push(noisy);
        }
    }
    Ok(LungSlice {
        image: ScalarVolume::image(n, n, image)?,
        body,
        lungs,
        ring,
    })
}

/// Known smooth deformation: small affine followed by a sinusoidal field.
/// It maps moving-image points onto fixed-image points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothDeformation {
    pub affine: AffineTransform,
    /// Peak sinusoidal displacement in mm.
    pub amplitude: f64,
    /// Wavelength in mm.
    pub period: f64,
}

impl SmoothDeformation {
    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        let q = self.affine.apply(p);
        let w = 2.0 * std::f64::consts::PI / self.period;
        [
            q[0] + self.amplitude * (w * q[1]).sin(),
            q[1] + self.amplitude * (w * q[0]).sin(),
            q[2],
        ]
    }

    /// Solves `apply(y) = p` by fixed-point iteration.
    pub fn invert(&self, p: [f64; 3]) -> [f64; 3] {
        let inv = self.affine.inverse().expect("deformation affine is invertible");
        let mut y = p;
        for _ in 0..200 {
            let r = self.apply(y);
            let d = [p[0] - r[0], p[1] - r[1], p[2] - r[2]];
            let step = inv.apply(d);
            let zero = inv.apply([0.0; 3]);
            for k in 0..3 {
                y[k] += step[k] - zero[k];
            }
            if d.iter().map(|v| v.abs()).fold(0.0, f64::max) < 1e-12 {
                break;
            }
        }
        y
    }
}

/// Fixed/moving pair related by a known deformation, with fixed landmarks
/// and their true moving positions.
#[derive(Debug, Clone)]
pub struct RegistrationPair {
    pub fixed: ScalarVolume,
    pub moving: ScalarVolume,
    pub fixed_landmarks: LandmarkSet,
    pub moving_landmarks: LandmarkSet,
    pub deformation: SmoothDeformation,
}

/// Pair settings; translation in voxels, rotation in degrees, sinusoid in
/// voxels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PairConfig {
    pub translation: [f64; 2],
    pub rotation_deg: f64,
    pub amplitude: f64,
    pub period: f64,
    pub landmark_grid: usize,
}

impl Default for PairConfig {
    fn default() -> Self {
        Self {
            translation: [3.0, -2.0],
            rotation_deg: 3.0,
            amplitude: 3.0,
            period: 96.0,
            landmark_grid: 10,
        }
    }
}

/// Warps `fixed` so that `moving(y) = fixed(D(y))`; landmarks sit on a
/// square grid over the central body region.
pub fn gen_registration_pair(fixed: &ScalarVolume, cfg: &PairConfig) -> Result<RegistrationPair> {
    let g = *fixed.geometry();
    if !g.is_2d() {
        return Err(Error::invalid("registration pair generator expects a 2D image"));
    }
    let s = g.spacing[0];
    let deformation = SmoothDeformation {
        affine: AffineTransform::rigid(
            [0.0, 0.0, cfg.rotation_deg.to_radians()],
            [cfg.translation[0] * s, cfg.translation[1] * s, 0.0],
            g.center(),
        ),
        amplitude: cfg.amplitude * s,
        period: cfg.period * s,
    };
    let mut moving = Vec::with_capacity(g.len());
    for i in 0..g.len() {
        let c = g.coords(i);
        let p = g.to_physical([c[0] as f64, c[1] as f64, 0.0]);
        moving.push(sample_at(fixed, deformation.apply(p), Interpolation::Linear).unwrap_or(0.0));
    }
    let moving = ScalarVolume::new(g, moving)?;
    let k = cfg.landmark_grid.max(1);
    let [nx, ny, _] = g.dims;
    let mut fixed_pts = Vec::with_capacity(k * k);
    for j in 0..k {
        for i in 0..k {
            let fx = 0.25 + 0.5 * i as f64 / (k.max(2) - 1) as f64;
            let fy = 0.3 + 0.4 * j as f64 / (k.max(2) - 1) as f64;
            fixed_pts.push([fx * (nx - 1) as f64, fy * (ny - 1) as f64, 0.0]);
        }
    }
    let moving_pts = fixed_pts
        .iter()
        .map(|p| {
            let y = deformation.invert(g.to_physical(*p));
            g.to_index(y)
        })
        .collect();
    Ok(RegistrationPair {
        fixed: fixed.clone(),
        moving,
        fixed_landmarks: LandmarkSet::new(fixed_pts, g.spacing)?,
        moving_landmarks: LandmarkSet::new(moving_pts, g.spacing)?,
        deformation,
    })
}
