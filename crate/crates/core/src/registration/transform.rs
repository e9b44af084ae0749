//! Spatial transforms mapping fixed-image physical points (mm) into
//! moving-image physical points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Geometry, LandmarkSet};

/// `p ↦ M (p − c) + c + t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineTransform {
    pub matrix: [[f64; 3]; 3],
    pub translation: [f64; 3],
    pub center: [f64; 3],
}

impl AffineTransform {
    pub fn identity() -> Self {
        Self {
            matrix: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: [0.0; 3],
            center: [0.0; 3],
        }
    }

    pub fn translation(t: [f64; 3]) -> Self {
        Self {
            translation: t,
            ..Self::identity()
        }
    }

    /// Rotation by Z·Y·X Euler angles (radians) about `center`, then `t`.
    pub fn rigid(angles: [f64; 3], translation: [f64; 3], center: [f64; 3]) -> Self {
        let (sx, cx) = angles[0].sin_cos();
        let (sy, cy) = angles[1].sin_cos();
        let (sz, cz) = angles[2].sin_cos();
        let rx = [[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]];
        let ry = [[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]];
        let rz = [[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]];
        Self {
            matrix: matmul(&rz, &matmul(&ry, &rx)),
            translation,
            center,
        }
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.matrix;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn validate(&self) -> Result<()> {
        if self
            .matrix
            .iter()
            .flatten()
            .chain(&self.translation)
            .chain(&self.center)
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid("affine transform has non-finite entries"));
        }
        if self.determinant().abs() <= 1e-12 {
            return Err(Error::invalid("affine matrix is singular"));
        }
        Ok(())
    }

    #[inline]
    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        let d = [p[0] - self.center[0], p[1] - self.center[1], p[2] - self.center[2]];
        let m = &self.matrix;
        let mut out = [0.0; 3];
        for r in 0..3 {
            out[r] = m[r][0] * d[0] + m[r][1] * d[1] + m[r][2] * d[2] + self.center[r] + self.translation[r];
        }
        out
    }

    /// Inverse mapping, same centre.
    pub fn inverse(&self) -> Result<Self> {
        self.validate()?;
        let m = &self.matrix;
        let det = self.determinant();
        let mut inv = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                let (r1, r2) = ((c + 1) % 3, (c + 2) % 3);
                let (c1, c2) = ((r + 1) % 3, (r + 2) % 3);
                inv[r][c] = (m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]) / det;
            }
        }
        // p = M⁻¹(q − c − t) + c
        let t = self.translation;
        let mut shift = [0.0; 3];
        for r in 0..3 {
            shift[r] = -(inv[r][0] * t[0] + inv[r][1] * t[1] + inv[r][2] * t[2]);
        }
        Ok(Self {
            matrix: inv,
            translation: shift,
            center: self.center,
        })
    }

    /// `other ∘ self`: apply `self` first, then `other`.
    pub fn then(&self, other: &AffineTransform) -> AffineTransform {
        // Express both as x ↦ A x + b.
        let (a1, b1) = self.linear_offset();
        let (a2, b2) = other.linear_offset();
        let a = matmul(&a2, &a1);
        let mut b = [0.0; 3];
        for r in 0..3 {
            b[r] = a2[r][0] * b1[0] + a2[r][1] * b1[1] + a2[r][2] * b1[2] + b2[r];
        }
        AffineTransform {
            matrix: a,
            translation: b,
            center: [0.0; 3],
        }
    }

    fn linear_offset(&self) -> ([[f64; 3]; 3], [f64; 3]) {
        let m = &self.matrix;
        let c = self.center;
        let mut b = [0.0; 3];
        for r in 0..3 {
            b[r] = c[r] + self.translation[r] - (m[r][0] * c[0] + m[r][1] * c[1] + m[r][2] * c[2]);
        }
        (*m, b)
    }
}

fn matmul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            out[r][c] = (0..3).map(|k| a[r][k] * b[k][c]).sum();
        }
    }
    out
}

/// Uniform cubic B-spline basis weights for fractional offset `u ∈ [0, 1)`,
/// for control points `i−1, i, i+1, i+2`.
#[inline]
pub fn cubic_weights(u: f64) -> [f64; 4] {
    let u2 = u * u;
    let u3 = u2 * u;
    let v = 1.0 - u;
    [
        v * v * v / 6.0,
        (3.0 * u3 - 6.0 * u2 + 4.0) / 6.0,
        (-3.0 * u3 + 3.0 * u2 + 3.0 * u + 1.0) / 6.0,
        u3 / 6.0,
    ]
}

/// Free-form deformation: `p ↦ p + Σ B(p) c` on a regular control grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsplineTransform {
    pub grid_dims: [usize; 3],
    pub grid_spacing: [f64; 3],
    pub grid_origin: [f64; 3],
    /// Displacement (mm) per control point, x fastest.
    pub coefficients: Vec<[f64; 3]>,
}

/// Control points and weights influencing one location.
#[derive(Debug, Clone)]
pub struct Support {
    pub indices: Vec<u32>,
    pub weights: Vec<f64>,
}

impl BsplineTransform {
    /// Zero deformation whose grid covers `geom` with cells of
    /// `spacing_mm`, plus one control point of margin on each side.
    pub fn zero_for(geom: &Geometry, spacing_mm: f64) -> Result<Self> {
        if !(spacing_mm > 0.0) {
            return Err(Error::invalid("grid spacing must be positive"));
        }
        let mut grid_dims = [0; 3];
        let mut grid_origin = [0.0; 3];
        for a in 0..3 {
            let extent = (geom.dims[a] - 1) as f64 * geom.spacing[a];
            let cells = ((extent / spacing_mm).ceil() as usize).max(1);
            grid_dims[a] = cells + 3;
            grid_origin[a] = geom.origin[a] - spacing_mm;
        }
        let n = grid_dims.iter().product();
        Ok(Self {
            grid_dims,
            grid_spacing: [spacing_mm; 3],
            grid_origin,
            coefficients: vec![[0.0; 3]; n],
        })
    }

    pub fn control_count(&self) -> usize {
        self.grid_dims.iter().product()
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_dims.iter().any(|&d| d < 4) {
            return Err(Error::invalid("B-spline grid needs at least 4 control points per axis"));
        }
        if self.grid_spacing.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::invalid("B-spline grid spacing must be positive"));
        }
        if self.coefficients.len() != self.control_count() {
            return Err(Error::invalid(format!(
                "B-spline has {} coefficients for {} control points",
                self.coefficients.len(),
                self.control_count()
            )));
        }
        Ok(())
    }

    /// Per-axis control index range start and weights for `p`.
    #[inline]
    fn axis_weights(&self, p: [f64; 3]) -> ([isize; 3], [[f64; 4]; 3]) {
        let mut base = [0isize; 3];
        let mut w = [[0.0; 4]; 3];
        for a in 0..3 {
            let g = (p[a] - self.grid_origin[a]) / self.grid_spacing[a];
            let i = g.floor();
            base[a] = i as isize - 1;
            w[a] = cubic_weights(g - i);
        }
        (base, w)
    }

    /// Control points with non-zero influence on `p` (grid points outside
    /// the control lattice contribute nothing).
    pub fn support(&self, p: [f64; 3]) -> Support {
        let (base, w) = self.axis_weights(p);
        let [nx, ny, nz] = self.grid_dims;
        let mut indices = Vec::with_capacity(64);
        let mut weights = Vec::with_capacity(64);
        for k in 0..4 {
            let z = base[2] + k as isize;
            if z < 0 || z >= nz as isize || w[2][k] == 0.0 {
                continue;
            }
            for j in 0..4 {
                let y = base[1] + j as isize;
                if y < 0 || y >= ny as isize || w[1][j] == 0.0 {
                    continue;
                }
                for i in 0..4 {
                    let x = base[0] + i as isize;
                    if x < 0 || x >= nx as isize || w[0][i] == 0.0 {
                        continue;
                    }
                    indices.push(((z as usize * ny + y as usize) * nx + x as usize) as u32);
                    weights.push(w[0][i] * w[1][j] * w[2][k]);
                }
            }
        }
        Support { indices, weights }
    }

    #[inline]
    pub fn displacement(&self, p: [f64; 3]) -> [f64; 3] {
        let (base, w) = self.axis_weights(p);
        let [nx, ny, nz] = self.grid_dims;
        let mut d = [0.0; 3];
        for k in 0..4 {
            let z = base[2] + k as isize;
            if z < 0 || z >= nz as isize {
                continue;
            }
            for j in 0..4 {
                let y = base[1] + j as isize;
                if y < 0 || y >= ny as isize {
                    continue;
                }
                let wyz = w[1][j] * w[2][k];
                for i in 0..4 {
                    let x = base[0] + i as isize;
                    if x < 0 || x >= nx as isize {
                        continue;
                    }
                    let c = &self.coefficients[(z as usize * ny + y as usize) * nx + x as usize];
                    let wt = w[0][i] * wyz;
                    d[0] += wt * c[0];
                    d[1] += wt * c[1];
                    d[2] += wt * c[2];
                }
            }
        }
        d
    }

    #[inline]
    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        let d = self.displacement(p);
        [p[0] + d[0], p[1] + d[1], p[2] + d[2]]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Stage {
    Affine(AffineTransform),
    Bspline(BsplineTransform),
}

impl Stage {
    #[inline]
    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        match self {
            Stage::Affine(a) => a.apply(p),
            Stage::Bspline(b) => b.apply(p),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Stage::Affine(a) => a.validate(),
            Stage::Bspline(b) => b.validate(),
        }
    }
}

/// Ordered stages applied left to right, fixed space → moving space.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TransformChain {
    pub stages: Vec<Stage>,
}

impl TransformChain {
    pub fn identity() -> Self {
        Self { stages: Vec::new() }
    }

    pub fn from_stages(stages: Vec<Stage>) -> Self {
        Self { stages }
    }

    pub fn push(&mut self, stage: Stage) {
        self.stages.push(stage);
    }

    pub fn validate(&self) -> Result<()> {
        self.stages.iter().try_for_each(Stage::validate)
    }

    #[inline]
    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        self.stages.iter().fold(p, |q, s| s.apply(q))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let chain: Self = serde_json::from_str(text)?;
        chain.validate()?;
        Ok(chain)
    }
}

/// Maps one physical point through the chain.
pub fn transform_point(chain: &TransformChain, p: [f64; 3]) -> [f64; 3] {
    chain.apply(p)
}

/// Maps fixed-space landmarks (voxel units) into moving-space voxel units.
/// Both sides share the landmark spacing.
pub fn transform_landmarks(chain: &TransformChain, fixed_lms: &LandmarkSet) -> LandmarkSet {
    transform_landmarks_to(chain, fixed_lms, fixed_lms.spacing)
}

/// As [`transform_landmarks`], expressing the result in `moving_spacing`.
pub fn transform_landmarks_to(
    chain: &TransformChain,
    fixed_lms: &LandmarkSet,
    moving_spacing: [f64; 3],
) -> LandmarkSet {
    let s = fixed_lms.spacing;
    let points = fixed_lms
        .points
        .iter()
        .map(|p| {
            let q = chain.apply([p[0] * s[0], p[1] * s[1], p[2] * s[2]]);
            [
                q[0] / moving_spacing[0],
                q[1] / moving_spacing[1],
                q[2] / moving_spacing[2],
            ]
        })
        .collect();
    LandmarkSet {
        points,
        spacing: moving_spacing,
    }
}
