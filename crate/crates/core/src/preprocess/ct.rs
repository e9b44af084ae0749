//! Lung-CT gantry/table removal.
//!
//! Per axial slice: check the four corners for a dark field-of-view border,
//! cluster inverted intensities with K-means (K = 3 with FOV, 2 without),
//! keep the brightest cluster as the body candidate, take its largest
//! component, fill holes, refine by closing, and mask the input with it.
//! CLAHE is applied last.

use serde::{Deserialize, Serialize};

use super::clahe::clahe;
use crate::error::{Error, Result};
use crate::morphology;
use crate::rng::SplitMix64;
use crate::volume::{Geometry, LabelVolume, ScalarVolume};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CtPreprocessConfig {
    /// Side of each square corner patch, pixels.
    pub corner_window: usize,
    /// Corner mean below `corner_threshold · max` counts as dark.
    pub corner_threshold: f64,
    pub k_fov: usize,
    pub k_nofov: usize,
    pub clahe_tiles: usize,
    pub clahe_clip: f64,
    pub morph_radius: usize,
}

impl Default for CtPreprocessConfig {
    fn default() -> Self {
        Self {
            corner_window: 10,
            corner_threshold: 0.05,
            k_fov: 3,
            k_nofov: 2,
            clahe_tiles: 8,
            clahe_clip: 2.0,
            morph_radius: 2,
        }
    }
}

impl CtPreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_fov != 3 || self.k_nofov != 2 {
            return Err(Error::invalid("cluster counts are fixed at 3 (FOV) and 2 (no FOV)"));
        }
        if self.corner_window == 0 {
            return Err(Error::invalid("corner_window must be positive"));
        }
        if !(self.clahe_clip >= 1.0) || self.clahe_tiles == 0 {
            return Err(Error::invalid("clahe_clip must be ≥ 1 and clahe_tiles ≥ 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fov {
    pub has_fov: bool,
    pub k: usize,
    /// Corner means: top-left, top-right, bottom-left, bottom-right.
    pub corner_means: [f64; 4],
}

fn require_2d(image: &ScalarVolume) -> Result<(usize, usize)> {
    let [w, h, d] = image.dims();
    if d != 1 {
        return Err(Error::invalid("expected a 2D image"));
    }
    Ok((w, h))
}

pub fn detect_fov(image: &ScalarVolume, cfg: &CtPreprocessConfig) -> Result<Fov> {
    cfg.validate()?;
    let (w, h) = require_2d(image)?;
    let c = cfg.corner_window;
    if w < 2 * c || h < 2 * c {
        return Err(Error::invalid(format!(
            "image {w}x{h} too small for {c}-pixel corner windows"
        )));
    }
    let max = image.min_max().1;
    let mean = |x0: usize, y0: usize| {
        let mut s = 0.0;
        for y in y0..y0 + c {
            for x in x0..x0 + c {
                s += image.data()[y * w + x];
            }
        }
        s / (c * c) as f64
    };
    let corner_means = [mean(0, 0), mean(w - c, 0), mean(0, h - c), mean(w - c, h - c)];
    let dark = corner_means.iter().filter(|&&m| m < cfg.corner_threshold * max).count();
    let has_fov = dark >= 3;
    Ok(Fov {
        has_fov,
        k: if has_fov { cfg.k_fov } else { cfg.k_nofov },
        corner_means,
    })
}

/// One-dimensional Lloyd K-means result.
#[derive(Debug, Clone)]
pub struct KMeans1d {
    pub assignment: Vec<usize>,
    pub centroids: Vec<f64>,
    pub iterations: usize,
    /// Within-cluster sum of squares after every assignment step.
    pub wcss_history: Vec<f64>,
}

const KMEANS_MAX_ITER: usize = 300;

/// K-means++ seeding followed by Lloyd iterations until the assignment is
/// a fixpoint or 300 iterations. Nearest-centroid ties go to the lower index.
pub fn kmeans_1d(values: &[f64], k: usize, seed: u64) -> Result<KMeans1d> {
    if k < 2 {
        return Err(Error::invalid("k must be at least 2"));
    }
    let mut distinct: Vec<f64> = values.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < k {
        return Err(Error::invalid(format!(
            "{} distinct values cannot form {k} clusters",
            distinct.len()
        )));
    }
    let mut rng = SplitMix64::new(seed);
    let mut centroids = vec![values[rng.below(values.len())]];
    let mut d2: Vec<f64> = values.iter().map(|v| (v - centroids[0]).powi(2)).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let mut target = rng.next_f64() * total;
        let mut pick = None;
        for (i, &d) in d2.iter().enumerate() {
            if d > 0.0 {
                pick = Some(i);
                if target < d {
                    break;
                }
                target -= d;
            }
        }
        let c = values[pick.expect("a value differs from every centroid")];
        centroids.push(c);
        for (d, v) in d2.iter_mut().zip(values) {
            *d = d.min((v - c).powi(2));
        }
    }

    let nearest = |v: f64, cs: &[f64]| {
        let mut best = 0;
        for j in 1..cs.len() {
            if (v - cs[j]).abs() < (v - cs[best]).abs() {
                best = j;
            }
        }
        best
    };
    let mut assignment: Vec<usize> = values.iter().map(|&v| nearest(v, &centroids)).collect();
    let wcss = |a: &[usize], cs: &[f64]| -> f64 { values.iter().zip(a).map(|(v, &j)| (v - cs[j]).powi(2)).sum() };
    let mut wcss_history = vec![wcss(&assignment, &centroids)];
    let mut iterations = 0;
    while iterations < KMEANS_MAX_ITER {
        iterations += 1;
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for (&v, &j) in values.iter().zip(&assignment) {
            sums[j] += v;
            counts[j] += 1;
        }
        for j in 0..k {
            if counts[j] > 0 {
                centroids[j] = sums[j] / counts[j] as f64;
            }
        }
        let next: Vec<usize> = values.iter().map(|&v| nearest(v, &centroids)).collect();
        let changed = next != assignment;
        assignment = next;
        wcss_history.push(wcss(&assignment, &centroids));
        if !changed {
            break;
        }
    }
    Ok(KMeans1d {
        assignment,
        centroids,
        iterations,
        wcss_history,
    })
}

#[derive(Debug, Clone)]
pub struct KMeansSegmentation {
    /// Cluster label per pixel, `0` = darkest cluster in the input image.
    pub labels: LabelVolume,
    /// Cluster centres in input intensity units, ascending.
    pub centroids: Vec<f64>,
}

/// K-means on the inverted image (`max − v`); centroids are reported back in
/// input units, ascending, with labels renumbered to match.
pub fn kmeans_segment(image: &ScalarVolume, k: usize, seed: u64) -> Result<KMeansSegmentation> {
    let max = image.min_max().1;
    let inverted: Vec<f64> = image.data().iter().map(|&v| max - v).collect();
    let km = kmeans_1d(&inverted, k, seed)?;
    let original: Vec<f64> = km.centroids.iter().map(|c| max - c).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| original[a].total_cmp(&original[b]));
    let mut rank = vec![0u16; k];
    for (r, &j) in order.iter().enumerate() {
        rank[j] = r as u16;
    }
    let labels = km.assignment.iter().map(|&j| rank[j]).collect();
    Ok(KMeansSegmentation {
        labels: LabelVolume::new(*image.geometry(), labels, k as u16)?,
        centroids: order.iter().map(|&j| original[j]).collect(),
    })
}

#[derive(Debug, Clone)]
pub struct ChestMask {
    pub filled: LabelVolume,
    /// Moore boundary of the filled mask, `[x, y]` pixels.
    pub contour: Vec<[usize; 2]>,
}

/// Largest 8-connected component, holes filled, refined by a disk closing of
/// `morph_radius`, holes filled again.
pub fn fill_chest_holes(mask: &LabelVolume, morph_radius: usize) -> Result<ChestMask> {
    let [w, h, d] = mask.dims();
    if d != 1 {
        return Err(Error::invalid("expected a 2D mask"));
    }
    let fg = mask.foreground();
    let largest = morphology::largest_component(&fg, w, h).ok_or_else(|| Error::invalid("empty mask"))?;
    let filled = morphology::fill_holes(&largest, w, h);
    let closed = morphology::close(&filled, w, h, morph_radius);
    let filled = morphology::fill_holes(&closed, w, h);
    let contour = morphology::trace_contour(&filled, w, h);
    Ok(ChestMask {
        filled: LabelVolume::binary(*mask.geometry(), &filled)?,
        contour,
    })
}

/// Zeroes everything outside the chest mask.
pub fn remove_gantry(image: &ScalarVolume, filled: &LabelVolume) -> Result<ScalarVolume> {
    if image.dims() != filled.dims() {
        return Err(Error::Geometry(format!(
            "remove_gantry: dims {:?} vs {:?}",
            image.dims(),
            filled.dims()
        )));
    }
    let data = image
        .data()
        .iter()
        .zip(filled.data())
        .map(|(&v, &m)| if m != 0 { v } else { 0.0 })
        .collect();
    image.with_data(data)
}

#[derive(Debug, Clone)]
pub struct CtSliceResult {
    pub fov: Fov,
    pub clusters: KMeansSegmentation,
    pub chest: ChestMask,
    pub cleaned: ScalarVolume,
    pub enhanced: ScalarVolume,
}

pub fn preprocess_ct_slice(image: &ScalarVolume, cfg: &CtPreprocessConfig, seed: u64) -> Result<CtSliceResult> {
    let fov = detect_fov(image, cfg)?;
    let clusters = kmeans_segment(image, fov.k, seed)?;
    let top = (fov.k - 1) as u16;
    let body: Vec<bool> = clusters.labels.data().iter().map(|&l| l == top).collect();
    let body = LabelVolume::binary(*image.geometry(), &body)?;
    let chest = fill_chest_holes(&body, cfg.morph_radius)?;
    let cleaned = remove_gantry(image, &chest.filled)?;
    let enhanced = clahe(&cleaned, cfg)?;
    Ok(CtSliceResult {
        fov,
        clusters,
        chest,
        cleaned,
        enhanced,
    })
}

/// Slice-by-slice CT preprocessing of a volume; returns the enhanced volume.
pub fn preprocess_ct_volume(vol: &ScalarVolume, cfg: &CtPreprocessConfig, seed: u64) -> Result<ScalarVolume> {
    let geom: Geometry = *vol.geometry();
    let mut data = Vec::with_capacity(geom.len());
    for z in 0..geom.dims[2] {
        let slice_seed = SplitMix64::derive(seed, z as u64).next_u64();
        let out = preprocess_ct_slice(&vol.slice(z), cfg, slice_seed)?;
        data.extend_from_slice(out.enhanced.data());
    }
    ScalarVolume::new(geom, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> CtPreprocessConfig {
        CtPreprocessConfig::default()
    }

    fn disk_image(n: usize, dark_corners: usize) -> ScalarVolume {
        let c = (n as f64 - 1.0) / 2.0;
        let mut data = vec![0.0; n * n];
        for y in 0..n {
            for x in 0..n {
                let r = ((x as f64 - c).powi(2) + (y as f64 - c).powi(2)).sqrt();
                data[y * n + x] = if r < 0.48 * n as f64 { 100.0 } else { 0.0 };
            }
        }
        // Brighten corners beyond the requested dark count.
        let corners = [(0, 0), (n - 10, 0), (0, n - 10), (n - 10, n - 10)];
        for &(x0, y0) in corners.iter().skip(dark_corners) {
            for y in y0..y0 + 10 {
                for x in x0..x0 + 10 {
                    data[y * n + x] = 100.0;
                }
            }
        }
        ScalarVolume::image(n, n, data).unwrap()
    }

    #[test]
    fn fov_detection() {
        let f = detect_fov(&disk_image(64, 4), &cfg()).unwrap();
        assert_eq!((f.has_fov, f.k), (true, 3));
        let bright = ScalarVolume::image(32, 32, vec![50.0; 1024]).unwrap();
        assert_eq!(detect_fov(&bright, &cfg()).unwrap().k, 2);
        let two = detect_fov(&disk_image(64, 2), &cfg()).unwrap();
        assert_eq!((two.has_fov, two.k), (false, 2));
        let three = detect_fov(&disk_image(64, 3), &cfg()).unwrap();
        assert!(three.has_fov);
        assert!(detect_fov(&ScalarVolume::image(15, 40, vec![0.0; 600]).unwrap(), &cfg()).is_err());
    }

    #[test]
    fn fov_scale_invariant() {
        let img = disk_image(64, 3);
        let a = detect_fov(&img, &cfg()).unwrap();
        for s in [0.001, 3.0, 1e6] {
            let b = detect_fov(&img.map(|v| v * s).unwrap(), &cfg()).unwrap();
            assert_eq!((a.has_fov, a.k), (b.has_fov, b.k));
        }
    }

    #[test]
    fn kmeans_exact_split_any_seed() {
        let mut data = vec![0.0; 100];
        data.extend(vec![10.0; 100]);
        let img = ScalarVolume::image(20, 10, data).unwrap();
        let a = kmeans_segment(&img, 2, 1).unwrap();
        let b = kmeans_segment(&img, 2, 999).unwrap();
        assert_eq!(a.centroids, vec![0.0, 10.0]);
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.labels.count(0), 100);
    }

    #[test]
    fn kmeans_too_few_values() {
        let img = ScalarVolume::image(4, 1, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        assert!(kmeans_segment(&img, 3, 0).is_err());
    }

    #[test]
    fn kmeans_objective_never_increases() {
        let mut rng = SplitMix64::new(42);
        let values: Vec<f64> = (0..2000).map(|i| (i % 4) as f64 * 3.0 + rng.normal()).collect();
        for seed in 0..5 {
            let km = kmeans_1d(&values, 4, seed).unwrap();
            for w in km.wcss_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-9 * w[0].abs());
            }
        }
    }

    #[test]
    fn chest_fill_keeps_largest_and_fills() {
        let n = 40;
        let g = Geometry::unit([n, n, 1]);
        let mut m = vec![0u16; n * n];
        // annulus around (15,15) plus a small blob
        for y in 0..n {
            for x in 0..n {
                let r = ((x as f64 - 15.0).powi(2) + (y as f64 - 15.0).powi(2)).sqrt();
                if (6.0..11.0).contains(&r) {
                    m[y * n + x] = 1;
                }
                if x >= 35 && y >= 35 && x < 38 && y < 38 {
                    m[y * n + x] = 1;
                }
            }
        }
        let mask = LabelVolume::new(g, m, 2).unwrap();
        let out = fill_chest_holes(&mask, 2).unwrap();
        assert_eq!(out.filled.at(15, 15, 0), 1);
        assert_eq!(out.filled.at(36, 36, 0), 0);
        assert!(!out.contour.is_empty());
        assert!(fill_chest_holes(&LabelVolume::new(g, vec![0; n * n], 2).unwrap(), 2).is_err());
    }

    #[test]
    fn gantry_masks() {
        let img = ScalarVolume::image(3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        let ones = LabelVolume::new(*img.geometry(), vec![1; 3], 2).unwrap();
        assert_eq!(remove_gantry(&img, &ones).unwrap(), img);
        let zeros = LabelVolume::new(*img.geometry(), vec![0; 3], 2).unwrap();
        assert_eq!(remove_gantry(&img, &zeros).unwrap().data(), &[0.0; 3]);
        let wrong = LabelVolume::new(Geometry::unit([1, 3, 1]), vec![0; 3], 2).unwrap();
        assert!(remove_gantry(&img, &wrong).is_err());
    }
}
