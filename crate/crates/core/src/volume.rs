//! Image, volume and landmark value types.
//!
//! Voxel data is stored row-major with x varying fastest, matching the
//! MetaImage payload order. 2D images are volumes with depth 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid geometry: voxel counts, spacing (mm/voxel) and origin (mm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
}

impl Geometry {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::Geometry(format!("dims must be positive, got {dims:?}")));
        }
        if spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::Geometry(format!("spacing must be positive, got {spacing:?}")));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::Geometry(format!("origin must be finite, got {origin:?}")));
        }
        Ok(Self { dims, spacing, origin })
    }

    /// Unit spacing, zero origin.
    pub fn unit(dims: [usize; 3]) -> Self {
        Self::new(dims, [1.0; 3], [0.0; 3]).expect("positive dims")
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_2d(&self) -> bool {
        self.dims[2] == 1
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.dims[1] + y) * self.dims[0] + x
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let x = index % self.dims[0];
        let y = (index / self.dims[0]) % self.dims[1];
        let z = index / (self.dims[0] * self.dims[1]);
        [x, y, z]
    }

    /// Continuous voxel index to physical millimetres.
    #[inline]
    pub fn to_physical(&self, p: [f64; 3]) -> [f64; 3] {
        [
            self.origin[0] + p[0] * self.spacing[0],
            self.origin[1] + p[1] * self.spacing[1],
            self.origin[2] + p[2] * self.spacing[2],
        ]
    }

    /// Physical millimetres to continuous voxel index.
    #[inline]
    pub fn to_index(&self, p: [f64; 3]) -> [f64; 3] {
        [
            (p[0] - self.origin[0]) / self.spacing[0],
            (p[1] - self.origin[1]) / self.spacing[1],
            (p[2] - self.origin[2]) / self.spacing[2],
        ]
    }

    /// Physical centre of the voxel grid.
    pub fn center(&self) -> [f64; 3] {
        self.to_physical([
            (self.dims[0] - 1) as f64 / 2.0,
            (self.dims[1] - 1) as f64 / 2.0,
            (self.dims[2] - 1) as f64 / 2.0,
        ])
    }

    /// Half the physical diagonal of the grid, at least one voxel.
    pub fn radius(&self) -> f64 {
        let mut r2 = 0.0;
        for a in 0..3 {
            let ext = (self.dims[a] - 1) as f64 * self.spacing[a] / 2.0;
            r2 += ext * ext;
        }
        r2.sqrt().max(self.spacing.iter().cloned().fold(f64::MAX, f64::min))
    }

    pub fn same_grid(&self, other: &Geometry) -> bool {
        self.dims == other.dims
            && self
                .spacing
                .iter()
                .zip(other.spacing.iter())
                .all(|(a, b)| (a - b).abs() <= 1e-9 * a.abs().max(1.0))
            && self
                .origin
                .iter()
                .zip(other.origin.iter())
                .all(|(a, b)| (a - b).abs() <= 1e-9 * a.abs().max(1.0))
    }

    pub(crate) fn ensure_same(&self, other: &Geometry, what: &str) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::Geometry(format!(
                "{what}: geometry mismatch ({:?} vs {:?})",
                self.dims, other.dims
            )))
        }
    }

    /// Single axial plane `z` of this grid as a depth-1 geometry.
    pub fn slice(&self, z: usize) -> Geometry {
        Geometry {
            dims: [self.dims[0], self.dims[1], 1],
            spacing: self.spacing,
            origin: [
                self.origin[0],
                self.origin[1],
                self.origin[2] + z as f64 * self.spacing[2],
            ],
        }
    }
}

/// Dense scalar volume with physical geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarVolume {
    geom: Geometry,
    data: Vec<f64>,
}

impl ScalarVolume {
    pub fn new(geom: Geometry, data: Vec<f64>) -> Result<Self> {
        if data.len() != geom.len() {
            return Err(Error::Geometry(format!(
                "data length {} does not match dims {:?}",
                data.len(),
                geom.dims
            )));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite value at voxel {bad}")));
        }
        Ok(Self { geom, data })
    }

    pub fn filled(geom: Geometry, value: f64) -> Self {
        Self {
            data: vec![value; geom.len()],
            geom,
        }
    }

    /// 2D image of `width × height` with unit spacing.
    pub fn image(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(Geometry::unit([width, height, 1]), data)
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn dims(&self) -> [usize; 3] {
        self.geom.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.geom.index(x, y, z)]
    }

    /// Same geometry, new values. Values must be finite.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        Self::new(self.geom, data)
    }

    pub(crate) fn from_parts_unchecked(geom: Geometry, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), geom.len());
        Self { geom, data }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        self.with_data(self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn min_max(&self) -> (f64, f64) {
        min_max(&self.data)
    }

    pub fn slice(&self, z: usize) -> ScalarVolume {
        let n = self.geom.dims[0] * self.geom.dims[1];
        ScalarVolume {
            geom: self.geom.slice(z),
            data: self.data[z * n..(z + 1) * n].to_vec(),
        }
    }
}

pub(crate) fn min_max(values: &[f64]) -> (f64, f64) {
    values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    })
}

/// Integer class map aligned to a scalar grid. Background is class 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVolume {
    geom: Geometry,
    data: Vec<u16>,
    class_count: u16,
}

/// Tissue label convention shared by the brain pipeline.
pub mod tissue {
    pub const BACKGROUND: u16 = 0;
    pub const CSF: u16 = 1;
    pub const GM: u16 = 2;
    pub const WM: u16 = 3;
    pub const CLASS_COUNT: u16 = 4;
    pub const NAMES: [&str; 3] = ["CSF", "GM", "WM"];
}

impl LabelVolume {
    pub fn new(geom: Geometry, data: Vec<u16>, class_count: u16) -> Result<Self> {
        if data.len() != geom.len() {
            return Err(Error::Geometry(format!(
                "label length {} does not match dims {:?}",
                data.len(),
                geom.dims
            )));
        }
        if let Some(&bad) = data.iter().find(|&&v| v >= class_count) {
            return Err(Error::invalid(format!("label {bad} outside class count {class_count}")));
        }
        Ok(Self {
            geom,
            data,
            class_count,
        })
    }

    /// Class count inferred as `max + 1` (at least 2).
    pub fn from_data(geom: Geometry, data: Vec<u16>) -> Result<Self> {
        let max = data.iter().copied().max().unwrap_or(0);
        Self::new(geom, data, (max + 1).max(2))
    }

    pub fn binary(geom: Geometry, mask: &[bool]) -> Result<Self> {
        Self::new(geom, mask.iter().map(|&b| b as u16).collect(), 2)
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn dims(&self) -> [usize; 3] {
        self.geom.dims
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    pub fn class_count(&self) -> u16 {
        self.class_count
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> u16 {
        self.data[self.geom.index(x, y, z)]
    }

    pub fn mask_of(&self, class: u16) -> Vec<bool> {
        self.data.iter().map(|&v| v == class).collect()
    }

    /// Voxels with any non-background label.
    pub fn foreground(&self) -> Vec<bool> {
        self.data.iter().map(|&v| v != 0).collect()
    }

    pub fn count(&self, class: u16) -> usize {
        self.data.iter().filter(|&&v| v == class).count()
    }

    pub fn slice(&self, z: usize) -> LabelVolume {
        let n = self.geom.dims[0] * self.geom.dims[1];
        LabelVolume {
            geom: self.geom.slice(z),
            data: self.data[z * n..(z + 1) * n].to_vec(),
            class_count: self.class_count,
        }
    }

    pub fn to_scalar(&self) -> ScalarVolume {
        ScalarVolume::from_parts_unchecked(self.geom, self.data.iter().map(|&v| v as f64).collect())
    }
}

/// 8-bit interleaved RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl ColorImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Geometry("image dims must be positive".into()));
        }
        if data.len() != width * height * 3 {
            return Err(Error::Geometry(format!(
                "expected {} bytes for {width}x{height} RGB, got {}",
                width * height * 3,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// One channel as a 2D scalar image.
    pub fn channel(&self, c: usize) -> ScalarVolume {
        let data = self.data.iter().skip(c).step_by(3).map(|&v| v as f64).collect();
        ScalarVolume::from_parts_unchecked(Geometry::unit([self.width, self.height, 1]), data)
    }

    /// ITU-R BT.601 luma as a 2D scalar image in `[0, 255]`.
    pub fn luminance(&self) -> ScalarVolume {
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
            .collect();
        ScalarVolume::from_parts_unchecked(Geometry::unit([self.width, self.height, 1]), data)
    }
}

/// Ordered 3D landmarks in 0-based voxel index units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkSet {
    pub points: Vec<[f64; 3]>,
    pub spacing: [f64; 3],
}

impl LandmarkSet {
    pub fn new(points: Vec<[f64; 3]>, spacing: [f64; 3]) -> Result<Self> {
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::invalid("non-finite landmark coordinate"));
        }
        if spacing.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::Geometry(format!("non-positive spacing {spacing:?}")));
        }
        Ok(Self { points, spacing })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn physical_round_trip() {
        let g = Geometry::new([4, 5, 6], [0.5, 2.0, 1.5], [1.0, -2.0, 3.0]).unwrap();
        let p = [1.25, 3.0, 4.5];
        let q = g.to_index(g.to_physical(p));
        for a in 0..3 {
            assert!((p[a] - q[a]).abs() < 1e-12);
        }
        assert_eq!(Geometry::unit([2, 2, 2]).to_physical(p), p);
    }

    #[test]
    fn index_coords_inverse() {
        let g = Geometry::unit([3, 4, 5]);
        for i in 0..g.len() {
            let [x, y, z] = g.coords(i);
            assert_eq!(g.index(x, y, z), i);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(Geometry::new([1, 1, 1], [0.0, 1.0, 1.0], [0.0; 3]).is_err());
        assert!(ScalarVolume::new(Geometry::unit([2, 2, 1]), vec![0.0; 3]).is_err());
        assert!(ScalarVolume::new(Geometry::unit([1, 1, 1]), vec![f64::NAN]).is_err());
        assert!(LabelVolume::new(Geometry::unit([1, 1, 1]), vec![4], 4).is_err());
        assert!(ColorImage::new(2, 2, vec![0; 11]).is_err());
    }
}
