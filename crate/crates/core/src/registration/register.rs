//! Multi-resolution intensity registration by finite-difference gradient
//! descent with step halving.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bending::BendingOperator;
use super::metric::{hard_bin, Accumulator, FixedSample, Metric, SoftBins};
use super::params::{validate_sequence, ParameterMap, Sampler, TransformKind};
use super::resample::linear_sample;
use super::transform::{AffineTransform, BsplineTransform, Stage, TransformChain};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::volume::{min_max, Geometry, ScalarVolume};

/// Cost trace for one pyramid level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelCost {
    pub factor: usize,
    pub initial: f64,
    #[serde(rename = "final")]
    pub final_cost: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageCosts {
    pub stage: usize,
    pub transform_kind: TransformKind,
    pub metric: Metric,
    pub levels: Vec<LevelCost>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Registration {
    pub chain: TransformChain,
    pub per_stage_costs: Vec<StageCosts>,
}

/// 1D Gaussian kernel truncated at 3σ, normalised to unit sum.
fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Separable Gaussian blur with σ in voxels; edges are clamped and axes of
/// extent 1 are left alone.
pub fn gaussian_smooth(vol: &ScalarVolume, sigma_vox: f64) -> ScalarVolume {
    if !(sigma_vox > 0.0) {
        return vol.clone();
    }
    let kernel = gaussian_kernel(sigma_vox);
    let r = (kernel.len() / 2) as isize;
    let g = *vol.geometry();
    let dims = g.dims;
    let stride = [1, dims[0], dims[0] * dims[1]];
    let mut cur = vol.data().to_vec();
    for axis in 0..3 {
        let n = dims[axis];
        if n == 1 {
            continue;
        }
        let mut next = vec![0.0; cur.len()];
        for (i, out) in next.iter_mut().enumerate() {
            let pos = (i / stride[axis]) % n;
            let base = i - pos * stride[axis];
            let mut acc = 0.0;
            for (k, w) in kernel.iter().enumerate() {
                let j = (pos as isize + k as isize - r).clamp(0, n as isize - 1) as usize;
                acc += w * cur[base + j * stride[axis]];
            }
            *out = acc;
        }
        cur = next;
    }
    ScalarVolume::from_parts_unchecked(g, cur)
}

/// Keeps every `factor`-th voxel; spacing grows accordingly, origin stays.
pub fn downsample(vol: &ScalarVolume, factor: usize) -> ScalarVolume {
    if factor <= 1 {
        return vol.clone();
    }
    let g = vol.geometry();
    let mut dims = [0; 3];
    let mut spacing = g.spacing;
    for a in 0..3 {
        dims[a] = g.dims[a].div_ceil(factor);
        if g.dims[a] > 1 {
            spacing[a] *= factor as f64;
        }
    }
    let ng = Geometry {
        dims,
        spacing,
        origin: g.origin,
    };
    let step = |a: usize| if g.dims[a] > 1 { factor } else { 1 };
    let mut data = Vec::with_capacity(ng.len());
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                data.push(vol.at(x * step(0), y * step(1), z * step(2)));
            }
        }
    }
    ScalarVolume::from_parts_unchecked(ng, data)
}

/// Smoothed and subsampled copy for pyramid factor `factor`.
pub fn pyramid_level(vol: &ScalarVolume, factor: usize) -> ScalarVolume {
    if factor <= 1 {
        vol.clone()
    } else {
        downsample(&gaussian_smooth(vol, factor as f64 / 2.0), factor)
    }
}

fn select_samples(n: usize, sampler: Sampler, seed: u64, stream: u64) -> Vec<usize> {
    match sampler {
        Sampler::Full => (0..n).collect(),
        Sampler::Random { sample_count, .. } if sample_count >= n => (0..n).collect(),
        Sampler::Random { sample_count, seed: s } => {
            let mut rng = SplitMix64::derive(seed ^ s, stream);
            let mut idx: Vec<usize> = (0..n).collect();
            for i in 0..sample_count {
                let j = i + rng.below(n - i);
                idx.swap(i, j);
            }
            idx.truncate(sample_count);
            idx.sort_unstable();
            idx
        }
    }
}

/// Per-level data shared by both transform kinds.
struct LevelData {
    moving: ScalarVolume,
    /// Sample positions after the already-fixed leading stages.
    q: Vec<[f64; 3]>,
    fixed: Vec<FixedSample>,
    metric: Metric,
    soft: SoftBins,
    spacing: f64,
}

impl LevelData {
    fn build(
        fixed_l: &ScalarVolume,
        moving_l: ScalarVolume,
        prior: &TransformChain,
        map: &ParameterMap,
        seed: u64,
        stream: u64,
    ) -> Self {
        let g = fixed_l.geometry();
        let (flo, fhi) = fixed_l.min_max();
        let (mlo, mhi) = moving_l.min_max();
        let idx = select_samples(g.len(), map.sampler, seed, stream);
        // Sparse coarse levels cannot populate a fine joint histogram.
        let bins = map.mi_bins.min(((idx.len() / 4) as f64).sqrt() as usize).max(8);
        let mut q = Vec::with_capacity(idx.len());
        let mut fixed = Vec::with_capacity(idx.len());
        for i in idx {
            let c = g.coords(i);
            q.push(prior.apply(g.to_physical([c[0] as f64, c[1] as f64, c[2] as f64])));
            let value = fixed_l.data()[i];
            fixed.push(FixedSample {
                value,
                bin: hard_bin(value, flo, fhi, bins) as u32,
            });
        }
        Self {
            spacing: g.spacing.iter().cloned().fold(f64::MAX, f64::min),
            moving: moving_l,
            q,
            fixed,
            metric: map.metric,
            soft: SoftBins::new(mlo, mhi, bins),
        }
    }

    #[inline]
    fn sample(&self, p: [f64; 3]) -> Option<f64> {
        let g = self.moving.geometry();
        linear_sample(g.dims, self.moving.data(), g.to_index(p))
    }

    fn accumulate(&self, positions: impl Iterator<Item = [f64; 3]>) -> Accumulator {
        let mut acc = Accumulator::new(self.metric, self.soft);
        for (p, f) in positions.zip(&self.fixed) {
            if let Some(v) = self.sample(p) {
                acc.update(f, v, 1.0);
            }
        }
        acc.refresh();
        acc
    }
}

/// Normalised gradient descent with step halving on non-improvement.
/// Returns the final cost and the number of trial steps taken.
fn descend(
    x: &mut [f64],
    mut cost: f64,
    step_init: f64,
    step_min: f64,
    max_iter: usize,
    mut gradient: impl FnMut(&[f64]) -> Vec<f64>,
    mut evaluate: impl FnMut(&[f64]) -> f64,
) -> (f64, usize) {
    let mut step = step_init;
    let mut g = gradient(x);
    let mut iterations = 0;
    let mut trial = x.to_vec();
    while iterations < max_iter && step >= step_min {
        let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(gmax > 0.0) || !gmax.is_finite() {
            break;
        }
        for (t, (xi, gi)) in trial.iter_mut().zip(x.iter().zip(&g)) {
            *t = xi - step * gi / gmax;
        }
        iterations += 1;
        let c = evaluate(&trial);
        if c < cost {
            x.copy_from_slice(&trial);
            cost = c;
            g = gradient(x);
        } else {
            step *= 0.5;
        }
    }
    (cost, iterations)
}

#[inline]
fn finite_or_zero(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

/// Affine parameters: 9 matrix offsets scaled by `radius`, then translation.
fn affine_from(theta: &[f64], radius: f64, center: [f64; 3]) -> AffineTransform {
    let mut m = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            m[r][c] = if r == c { 1.0 } else { 0.0 } + theta[r * 3 + c] / radius;
        }
    }
    AffineTransform {
        matrix: m,
        translation: [theta[9], theta[10], theta[11]],
        center,
    }
}

fn divergence(stage: usize, factor: usize, cost: f64) -> Error {
    Error::Divergence {
        stage,
        reason: format!("non-finite cost {cost} at pyramid factor {factor}"),
    }
}

struct StageInput<'a> {
    fixed_levels: &'a [ScalarVolume],
    moving_levels: &'a [ScalarVolume],
    fixed_geom: &'a Geometry,
    prior: &'a TransformChain,
    map: &'a ParameterMap,
    seed: u64,
    stage: usize,
    active_axes: Vec<usize>,
}

impl StageInput<'_> {
    fn level(&self, l: usize) -> LevelData {
        LevelData::build(
            &self.fixed_levels[l],
            self.moving_levels[l].clone(),
            self.prior,
            self.map,
            self.seed,
            (self.stage as u64) << 16 | l as u64,
        )
    }
}

fn optimize_affine(input: &StageInput) -> Result<(AffineTransform, Vec<LevelCost>)> {
    let radius = input.fixed_geom.radius();
    let center = input.fixed_geom.center();
    let mut active = Vec::new();
    for r in 0..3 {
        for c in 0..3 {
            if input.active_axes.contains(&r) && input.active_axes.contains(&c) {
                active.push(r * 3 + c);
            }
        }
    }
    active.extend(input.active_axes.iter().map(|a| 9 + a));
    let mut theta = vec![0.0; 12];
    let mut levels = Vec::new();
    for (l, &factor) in input.map.pyramid_schedule.iter().enumerate() {
        let data = input.level(l);
        let h = 0.05 * data.spacing;
        let eval = |th: &[f64]| {
            let t = affine_from(th, radius, center);
            data.accumulate(data.q.iter().map(|&q| t.apply(q))).cost()
        };
        let initial = eval(&theta);
        if !initial.is_finite() {
            return Err(divergence(input.stage, factor, initial));
        }
        let gradient = |th: &[f64]| {
            let partial: Vec<f64> = active
                .par_iter()
                .map(|&k| {
                    let mut probe = th.to_vec();
                    probe[k] = th[k] + h;
                    let cp = eval(&probe);
                    probe[k] = th[k] - h;
                    let cm = eval(&probe);
                    finite_or_zero((cp - cm) / (2.0 * h))
                })
                .collect();
            let mut g = vec![0.0; 12];
            for (&k, v) in active.iter().zip(partial) {
                g[k] = v;
            }
            g
        };
        let (final_cost, iterations) = descend(
            &mut theta,
            initial,
            input.map.step_init * factor as f64,
            input.map.step_min * factor as f64,
            input.map.iterations_per_level[l],
            gradient,
            eval,
        );
        levels.push(LevelCost {
            factor,
            initial,
            final_cost,
            iterations,
        });
    }
    Ok((affine_from(&theta, radius, center), levels))
}

/// Bending-energy sample grid at half the control spacing over `geom`.
fn bending_grid(geom: &Geometry, spacing: f64) -> Geometry {
    let h = spacing / 2.0;
    let mut dims = [1; 3];
    let mut sp = [h; 3];
    for a in 0..3 {
        if geom.dims[a] > 1 {
            let extent = (geom.dims[a] - 1) as f64 * geom.spacing[a];
            dims[a] = (extent / h).floor() as usize + 1;
        } else {
            sp[a] = geom.spacing[a];
        }
    }
    Geometry {
        dims,
        spacing: sp,
        origin: geom.origin,
    }
}

/// Sample supports in CSR layout plus the transposed (control → sample) index.
struct SupportIndex {
    offsets: Vec<usize>,
    cps: Vec<u32>,
    weights: Vec<f64>,
    inv_offsets: Vec<usize>,
    inv: Vec<(u32, f64)>,
}

impl SupportIndex {
    fn new(t: &BsplineTransform, q: &[[f64; 3]]) -> Self {
        let mut offsets = vec![0];
        let mut cps = Vec::new();
        let mut weights = Vec::new();
        let mut counts = vec![0usize; t.control_count()];
        for p in q {
            let s = t.support(*p);
            for &j in &s.indices {
                counts[j as usize] += 1;
            }
            cps.extend_from_slice(&s.indices);
            weights.extend_from_slice(&s.weights);
            offsets.push(cps.len());
        }
        let mut inv_offsets = vec![0; counts.len() + 1];
        for j in 0..counts.len() {
            inv_offsets[j + 1] = inv_offsets[j] + counts[j];
        }
        let mut fill = inv_offsets.clone();
        let mut inv = vec![(0u32, 0.0); cps.len()];
        for s in 0..q.len() {
            for k in offsets[s]..offsets[s + 1] {
                let j = cps[k] as usize;
                inv[fill[j]] = (s as u32, weights[k]);
                fill[j] += 1;
            }
        }
        Self {
            offsets,
            cps,
            weights,
            inv_offsets,
            inv,
        }
    }

    fn positions(&self, q: &[[f64; 3]], coeffs: &[f64]) -> Vec<[f64; 3]> {
        q.iter()
            .enumerate()
            .map(|(s, p)| {
                let mut m = *p;
                for k in self.offsets[s]..self.offsets[s + 1] {
                    let j = self.cps[k] as usize * 3;
                    let w = self.weights[k];
                    m[0] += w * coeffs[j];
                    m[1] += w * coeffs[j + 1];
                    m[2] += w * coeffs[j + 2];
                }
                m
            })
            .collect()
    }

    fn affected(&self, j: usize) -> &[(u32, f64)] {
        &self.inv[self.inv_offsets[j]..self.inv_offsets[j + 1]]
    }
}

/// On axes the image does not span, only the control plane carrying the
/// largest basis weight is optimised; the others would duplicate it.
fn dominant_planes<'a>(t: &'a BsplineTransform, geom: &Geometry, active_axes: &[usize]) -> impl Fn(usize) -> bool + 'a {
    let mut keep: [Option<usize>; 3] = [None; 3];
    for a in 0..3 {
        if !active_axes.contains(&a) {
            let g = (geom.origin[a] - t.grid_origin[a]) / t.grid_spacing[a];
            let u = g - g.floor();
            // weights of planes floor−1 .. floor+2 are [(1−u)³, ·, ·, u³]/6; the
            // second plane dominates for u ≤ 0.5, the third otherwise
            keep[a] = Some(g.floor() as usize - 1 + usize::from(u > 0.5));
        }
    }
    let dims = t.grid_dims;
    move |j: usize| {
        let c = [j % dims[0], (j / dims[0]) % dims[1], j / (dims[0] * dims[1])];
        (0..3).all(|a| keep[a].is_none_or(|k| c[a] == k))
    }
}

fn as_points(flat: &[f64]) -> Vec<[f64; 3]> {
    flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
}

fn optimize_bspline(input: &StageInput) -> Result<(BsplineTransform, Vec<LevelCost>)> {
    let map = input.map;
    let mut t = BsplineTransform::zero_for(input.fixed_geom, map.grid_spacing_mm)?;
    let bending = (map.bending_weight > 0.0)
        .then(|| BendingOperator::new(&t, &bending_grid(input.fixed_geom, map.grid_spacing_mm)));
    let lambda = map.bending_weight;
    let mut coeffs = vec![0.0; 3 * t.control_count()];
    let mut levels = Vec::new();
    for (l, &factor) in map.pyramid_schedule.iter().enumerate() {
        let data = input.level(l);
        let index = SupportIndex::new(&t, &data.q);
        let h = 0.05 * data.spacing;
        let reg = |c: &[f64]| bending.as_ref().map_or(0.0, |b| lambda * b.energy(&as_points(c)));
        let eval = |c: &[f64]| {
            let pos = index.positions(&data.q, c);
            data.accumulate(pos.into_iter()).cost() + reg(c)
        };
        let planes = dominant_planes(&t, input.fixed_geom, &input.active_axes);
        let active: Vec<usize> = (0..t.control_count())
            .filter(|&j| !index.affected(j).is_empty() && planes(j))
            .flat_map(|j| input.active_axes.iter().map(move |&a| 3 * j + a))
            .collect();
        let gradient = |c: &[f64]| {
            let pos = index.positions(&data.q, c);
            let vals: Vec<Option<f64>> = pos.iter().map(|&p| data.sample(p)).collect();
            let mut base = Accumulator::new(data.metric, data.soft);
            for (v, f) in vals.iter().zip(&data.fixed) {
                if let Some(v) = v {
                    base.update(f, *v, 1.0);
                }
            }
            base.refresh();
            let partial: Vec<f64> = active
                .par_iter()
                .map(|&k| {
                    let (j, axis) = (k / 3, k % 3);
                    let mut side = [0.0; 2];
                    for (si, sign) in [1.0, -1.0].into_iter().enumerate() {
                        let mut acc = base.clone();
                        for &(s, w) in index.affected(j) {
                            let s = s as usize;
                            let mut p = pos[s];
                            p[axis] += sign * h * w;
                            if let Some(old) = vals[s] {
                                acc.update(&data.fixed[s], old, -1.0);
                            }
                            if let Some(new) = data.sample(p) {
                                acc.update(&data.fixed[s], new, 1.0);
                            }
                        }
                        side[si] = acc.cost();
                    }
                    finite_or_zero((side[0] - side[1]) / (2.0 * h))
                })
                .collect();
            let mut g = vec![0.0; c.len()];
            for (&k, v) in active.iter().zip(partial) {
                g[k] = v;
            }
            if let Some(b) = &bending {
                for (j, gj) in b.gradient(&as_points(c)).into_iter().enumerate() {
                    for &a in &input.active_axes {
                        g[3 * j + a] += lambda * gj[a];
                    }
                }
            }
            g
        };
        let initial = eval(&coeffs);
        if !initial.is_finite() {
            return Err(divergence(input.stage, factor, initial));
        }
        let (final_cost, iterations) = descend(
            &mut coeffs,
            initial,
            map.step_init * factor as f64,
            map.step_min * factor as f64,
            map.iterations_per_level[l],
            gradient,
            eval,
        );
        levels.push(LevelCost {
            factor,
            initial,
            final_cost,
            iterations,
        });
    }
    t.coefficients = as_points(&coeffs);
    Ok((t, levels))
}

/// Registers `moving` to `fixed`, optimising one stage per parameter map and
/// appending each to the chain. The chain maps fixed → moving points.
pub fn register(fixed: &ScalarVolume, moving: &ScalarVolume, maps: &[ParameterMap], seed: u64) -> Result<Registration> {
    validate_sequence(maps)?;
    for (name, v) in [("fixed", fixed), ("moving", moving)] {
        let (lo, hi) = min_max(v.data());
        if !(hi > lo) {
            return Err(Error::invalid(format!("{name} volume is constant")));
        }
    }
    let fixed_geom = *fixed.geometry();
    let active_axes: Vec<usize> = (0..3)
        .filter(|&a| fixed_geom.dims[a] > 1 || moving.geometry().dims[a] > 1)
        .collect();
    let mut chain = TransformChain::identity();
    let mut per_stage_costs = Vec::with_capacity(maps.len());
    for (stage, map) in maps.iter().enumerate() {
        let fixed_levels: Vec<ScalarVolume> = map.pyramid_schedule.iter().map(|&f| pyramid_level(fixed, f)).collect();
        let moving_levels: Vec<ScalarVolume> = map.pyramid_schedule.iter().map(|&f| pyramid_level(moving, f)).collect();
        let input = StageInput {
            fixed_levels: &fixed_levels,
            moving_levels: &moving_levels,
            fixed_geom: &fixed_geom,
            prior: &chain,
            map,
            seed,
            stage,
            active_axes: active_axes.clone(),
        };
        let (new_stage, levels) = match map.transform_kind {
            TransformKind::Affine => {
                let (a, lv) = optimize_affine(&input)?;
                (Stage::Affine(a), lv)
            }
            TransformKind::Bspline => {
                let (b, lv) = optimize_bspline(&input)?;
                (Stage::Bspline(b), lv)
            }
        };
        log::debug!(
            "stage {stage} ({:?}/{:?}) levels {levels:?}",
            map.transform_kind,
            map.metric
        );
        chain.push(new_stage);
        per_stage_costs.push(StageCosts {
            stage,
            transform_kind: map.transform_kind,
            metric: map.metric,
            levels,
        });
    }
    Ok(Registration { chain, per_stage_costs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registration::{resample, Interpolation, PresetLibrary};

    fn blobs(dims: [usize; 3]) -> ScalarVolume {
        let g = Geometry::unit(dims);
        let c = g.center();
        let data = (0..g.len())
            .map(|i| {
                let p = g.coords(i);
                let (x, y, z) = (p[0] as f64 - c[0], p[1] as f64 - c[1], p[2] as f64 - c[2]);
                let r2 = x * x / 64.0 + y * y / 36.0 + z * z / 49.0;
                let body = if r2 < 1.0 { 1.0 } else { 0.0 };
                let spot = (-((x - 3.0).powi(2) + (y + 2.0).powi(2) + z * z) / 6.0).exp();
                body * (0.5 + 0.1 * (x / 3.0).sin()) + spot
            })
            .collect();
        ScalarVolume::new(g, data).unwrap()
    }

    fn translation_of(chain: &TransformChain) -> [f64; 3] {
        // with M close to I the origin lands on the translation
        chain.apply([0.0; 3])
    }

    #[test]
    fn identical_images_stay_at_identity() {
        let v = blobs([24, 24, 20]);
        let maps = PresetLibrary::get("affine-mse", v.geometry()).unwrap();
        let r = register(&v, &v, &maps, 3).unwrap();
        let t = translation_of(&r.chain);
        assert!(t.iter().all(|c| c.abs() < 0.1), "{t:?}");
    }

    #[test]
    fn recovers_four_voxel_translation() {
        let fixed = blobs([32, 32, 24]);
        let shift = TransformChain::from_stages(vec![Stage::Affine(AffineTransform::translation([4.0, 0.0, 0.0]))]);
        // moving(x) = fixed(x + 4) so the recovered transform is x ↦ x − 4
        let moving = resample(&fixed, &shift, fixed.geometry(), Interpolation::Linear).unwrap();
        let maps = PresetLibrary::get("affine-mse", fixed.geometry()).unwrap();
        let r = register(&fixed, &moving, &maps, 9).unwrap();
        let p = fixed.geometry().center();
        let q = r.chain.apply(p);
        assert!(
            (q[0] - p[0] + 4.0).abs() < 0.5 && (q[1] - p[1]).abs() < 0.5 && (q[2] - p[2]).abs() < 0.5,
            "{q:?}"
        );
        for s in &r.per_stage_costs {
            for l in &s.levels {
                assert!(l.final_cost <= l.initial);
            }
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let fixed = blobs([20, 20, 1]);
        let shift = TransformChain::from_stages(vec![Stage::Affine(AffineTransform::translation([1.5, -1.0, 0.0]))]);
        let moving = resample(&fixed, &shift, fixed.geometry(), Interpolation::Linear).unwrap();
        let mut maps = PresetLibrary::get("combined-best", fixed.geometry()).unwrap();
        for m in maps.iter_mut() {
            m.iterations_per_level.iter_mut().for_each(|i| *i = 5);
        }
        let a = register(&fixed, &moving, &maps, 42).unwrap();
        let b = register(&fixed, &moving, &maps, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.chain.stages.len(), 3);
    }

    #[test]
    fn constant_input_rejected() {
        let v = ScalarVolume::filled(Geometry::unit([8, 8, 8]), 1.0);
        let maps = PresetLibrary::get("affine-mse", v.geometry()).unwrap();
        assert!(register(&v, &v, &maps, 0).is_err());
    }

    #[test]
    fn divergence_reports_stage() {
        let fixed = blobs([16, 16, 1]);
        let moving = blobs([16, 16, 1]);
        let far = Geometry::new([16, 16, 1], [1.0; 3], [500.0, 500.0, 0.0]).unwrap();
        let moving = ScalarVolume::new(far, moving.into_data()).unwrap();
        let maps = PresetLibrary::get("affine-mse", fixed.geometry()).unwrap();
        match register(&fixed, &moving, &maps, 0) {
            Err(Error::Divergence { stage: 0, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pyramid_geometry() {
        let v = blobs([17, 10, 1]);
        let d = pyramid_level(&v, 4);
        assert_eq!(d.dims(), [5, 3, 1]);
        assert_eq!(d.geometry().spacing, [4.0, 4.0, 1.0]);
        let s = gaussian_smooth(&ScalarVolume::filled(Geometry::unit([6, 6, 6]), 2.0), 1.5);
        assert!(s.data().iter().all(|x| (x - 2.0).abs() < 1e-12));
    }
}
