//! Sampling moving volumes through a transform chain onto a fixed grid.

use serde::{Deserialize, Serialize};

use super::transform::TransformChain;
use crate::error::{Error, Result};
use crate::volume::{Geometry, LabelVolume, ScalarVolume};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Nearest,
    Linear,
}

/// Continuous index inside the half-voxel-padded grid.
#[inline]
pub(crate) fn in_bounds(dims: [usize; 3], idx: [f64; 3]) -> bool {
    (0..3).all(|a| idx[a] >= -0.5 && idx[a] <= dims[a] as f64 - 0.5)
}

/// Nearest-neighbour flat index, or `None` outside the grid.
#[inline]
pub(crate) fn nearest_index(dims: [usize; 3], idx: [f64; 3]) -> Option<usize> {
    if !in_bounds(dims, idx) {
        return None;
    }
    let mut c = [0usize; 3];
    for a in 0..3 {
        c[a] = (idx[a].round().max(0.0) as usize).min(dims[a] - 1);
    }
    Some((c[2] * dims[1] + c[1]) * dims[0] + c[0])
}

/// Trilinear sample with edge clamping; `None` outside the grid.
#[inline]
pub(crate) fn linear_sample(dims: [usize; 3], data: &[f64], idx: [f64; 3]) -> Option<f64> {
    if !in_bounds(dims, idx) {
        return None;
    }
    let mut i0 = [0usize; 3];
    let mut i1 = [0usize; 3];
    let mut t = [0.0; 3];
    for a in 0..3 {
        let hi = (dims[a] - 1) as f64;
        let x = idx[a].clamp(0.0, hi);
        let f = x.floor();
        i0[a] = f as usize;
        i1[a] = (i0[a] + 1).min(dims[a] - 1);
        t[a] = x - f;
    }
    let [nx, ny, _] = dims;
    let at = |x: usize, y: usize, z: usize| data[(z * ny + y) * nx + x];
    let lerp = |a: f64, b: f64, t: f64| a + t * (b - a);
    let c00 = lerp(at(i0[0], i0[1], i0[2]), at(i1[0], i0[1], i0[2]), t[0]);
    let c10 = lerp(at(i0[0], i1[1], i0[2]), at(i1[0], i1[1], i0[2]), t[0]);
    let plane0 = lerp(c00, c10, t[1]);
    if t[2] == 0.0 {
        return Some(plane0);
    }
    let c01 = lerp(at(i0[0], i0[1], i1[2]), at(i1[0], i0[1], i1[2]), t[0]);
    let c11 = lerp(at(i0[0], i1[1], i1[2]), at(i1[0], i1[1], i1[2]), t[0]);
    Some(lerp(plane0, lerp(c01, c11, t[1]), t[2]))
}

/// Sample `moving` at physical point `q`.
#[inline]
pub fn sample_at(moving: &ScalarVolume, q: [f64; 3], interp: Interpolation) -> Option<f64> {
    let g = moving.geometry();
    let idx = g.to_index(q);
    match interp {
        Interpolation::Nearest => nearest_index(g.dims, idx).map(|i| moving.data()[i]),
        Interpolation::Linear => linear_sample(g.dims, moving.data(), idx),
    }
}

/// Warps `moving` onto `fixed_geom`; samples falling outside are 0.
pub fn resample(
    moving: &ScalarVolume,
    chain: &TransformChain,
    fixed_geom: &Geometry,
    interp: Interpolation,
) -> Result<ScalarVolume> {
    Ok(resample_with_validity(moving, chain, fixed_geom, interp)?.0)
}

/// Like [`resample`], also returning which voxels sampled inside the moving grid.
pub fn resample_with_validity(
    moving: &ScalarVolume,
    chain: &TransformChain,
    fixed_geom: &Geometry,
    interp: Interpolation,
) -> Result<(ScalarVolume, Vec<bool>)> {
    chain.validate()?;
    let n = fixed_geom.len();
    let mut data = Vec::with_capacity(n);
    let mut valid = Vec::with_capacity(n);
    for i in 0..n {
        let c = fixed_geom.coords(i);
        let p = fixed_geom.to_physical([c[0] as f64, c[1] as f64, c[2] as f64]);
        match sample_at(moving, chain.apply(p), interp) {
            Some(v) => {
                data.push(v);
                valid.push(true);
            }
            None => {
                data.push(0.0);
                valid.push(false);
            }
        }
    }
    Ok((ScalarVolume::from_parts_unchecked(*fixed_geom, data), valid))
}

/// Label resampling; only nearest-neighbour keeps labels meaningful.
pub fn resample_labels(
    moving: &LabelVolume,
    chain: &TransformChain,
    fixed_geom: &Geometry,
    interp: Interpolation,
) -> Result<LabelVolume> {
    if interp != Interpolation::Nearest {
        return Err(Error::invalid(
            "label volumes can only be resampled with nearest interpolation",
        ));
    }
    chain.validate()?;
    let g = moving.geometry();
    let data = (0..fixed_geom.len())
        .map(|i| {
            let c = fixed_geom.coords(i);
            let p = fixed_geom.to_physical([c[0] as f64, c[1] as f64, c[2] as f64]);
            nearest_index(g.dims, g.to_index(chain.apply(p))).map_or(0, |j| moving.data()[j])
        })
        .collect();
    LabelVolume::new(*fixed_geom, data, moving.class_count())
}
