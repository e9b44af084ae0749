//! Bending energy of a B-spline displacement field.

use std::collections::BTreeMap;

use super::transform::BsplineTransform;
use crate::volume::Geometry;

/// Axes of the sample grid that carry more than one point.
fn active_axes(grid: &Geometry) -> Vec<usize> {
    (0..3).filter(|&a| grid.dims[a] > 1).collect()
}

/// Stencil for one second-derivative term: offsets (in steps) and weights,
/// plus the multiplicity of the term in the Hessian norm.
fn stencils(grid: &Geometry) -> Vec<(Vec<([i32; 3], f64)>, f64)> {
    let axes = active_axes(grid);
    let h = grid.spacing;
    let mut out = Vec::new();
    for (k, &i) in axes.iter().enumerate() {
        let mut e = [0; 3];
        e[i] = 1;
        let inv = 1.0 / (h[i] * h[i]);
        out.push((vec![(e, inv), ([0; 3], -2.0 * inv), ([-e[0], -e[1], -e[2]], inv)], 1.0));
        for &j in &axes[k + 1..] {
            let w = 1.0 / (4.0 * h[i] * h[j]);
            let mut pp = [0; 3];
            pp[i] = 1;
            pp[j] = 1;
            let mut pm = [0; 3];
            pm[i] = 1;
            pm[j] = -1;
            let mm = [-pp[0], -pp[1], -pp[2]];
            let mp = [-pm[0], -pm[1], -pm[2]];
            out.push((vec![(pp, w), (pm, -w), (mp, -w), (mm, w)], 2.0));
        }
    }
    out
}

fn offset_point(p: [f64; 3], off: [i32; 3], h: [f64; 3]) -> [f64; 3] {
    [
        p[0] + off[0] as f64 * h[0],
        p[1] + off[1] as f64 * h[1],
        p[2] + off[2] as f64 * h[2],
    ]
}

/// Mean over `sample_grid` of the squared-Hessian norm of the displacement,
/// with second derivatives taken by central differences at the grid spacing.
pub fn bending_energy(t: &BsplineTransform, sample_grid: &Geometry) -> f64 {
    let terms = stencils(sample_grid);
    if terms.is_empty() {
        return 0.0;
    }
    let h = sample_grid.spacing;
    let mut total = 0.0;
    for idx in 0..sample_grid.len() {
        let c = sample_grid.coords(idx);
        let p = sample_grid.to_physical([c[0] as f64, c[1] as f64, c[2] as f64]);
        for (stencil, mult) in &terms {
            let mut d = [0.0; 3];
            for (off, w) in stencil {
                let u = t.displacement(offset_point(p, *off, h));
                for k in 0..3 {
                    d[k] += w * u[k];
                }
            }
            total += mult * (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
        }
    }
    total / sample_grid.len() as f64
}

/// Bending energy as a quadratic form `E(c) = |S c|² / M` over coefficients.
#[derive(Debug, Clone)]
pub(crate) struct BendingOperator {
    rows: Vec<Vec<(u32, f64)>>,
    points: usize,
}

impl BendingOperator {
    pub fn new(t: &BsplineTransform, sample_grid: &Geometry) -> Self {
        let terms = stencils(sample_grid);
        let h = sample_grid.spacing;
        let mut rows = Vec::new();
        for idx in 0..sample_grid.len() {
            let c = sample_grid.coords(idx);
            let p = sample_grid.to_physical([c[0] as f64, c[1] as f64, c[2] as f64]);
            for (stencil, mult) in &terms {
                let scale = mult.sqrt();
                let mut row: BTreeMap<u32, f64> = BTreeMap::new();
                for (off, w) in stencil {
                    let s = t.support(offset_point(p, *off, h));
                    for (&j, &bw) in s.indices.iter().zip(&s.weights) {
                        *row.entry(j).or_insert(0.0) += scale * w * bw;
                    }
                }
                let row: Vec<(u32, f64)> = row.into_iter().filter(|(_, v)| *v != 0.0).collect();
                if !row.is_empty() {
                    rows.push(row);
                }
            }
        }
        Self {
            rows,
            points: sample_grid.len().max(1),
        }
    }

    pub fn energy(&self, coeffs: &[[f64; 3]]) -> f64 {
        let mut e = 0.0;
        for row in &self.rows {
            let mut d = [0.0; 3];
            for &(j, w) in row {
                let c = &coeffs[j as usize];
                d[0] += w * c[0];
                d[1] += w * c[1];
                d[2] += w * c[2];
            }
            e += d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        }
        e / self.points as f64
    }

    /// Exact gradient `2 Sᵀ S c / M`.
    pub fn gradient(&self, coeffs: &[[f64; 3]]) -> Vec<[f64; 3]> {
        let mut g = vec![[0.0; 3]; coeffs.len()];
        let scale = 2.0 / self.points as f64;
        for row in &self.rows {
            let mut d = [0.0; 3];
            for &(j, w) in row {
                let c = &coeffs[j as usize];
                d[0] += w * c[0];
                d[1] += w * c[1];
                d[2] += w * c[2];
            }
            for &(j, w) in row {
                let gj = &mut g[j as usize];
                for k in 0..3 {
                    gj[k] += scale * w * d[k];
                }
            }
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn grid() -> (BsplineTransform, Geometry) {
        let g = Geometry::unit([20, 18, 12]);
        let t = BsplineTransform::zero_for(&g, 5.0).unwrap();
        let interior = Geometry::new([8, 7, 5], [1.5, 1.5, 1.5], [3.0, 3.0, 2.0]).unwrap();
        (t, interior)
    }

    #[test]
    fn zero_coefficients() {
        let (t, s) = grid();
        assert_eq!(bending_energy(&t, &s), 0.0);
    }

    #[test]
    fn linear_displacement_has_no_energy() {
        let (mut t, s) = grid();
        let [nx, ny, _] = t.grid_dims;
        for (i, c) in t.coefficients.iter_mut().enumerate() {
            let x = (i % nx) as f64;
            let y = ((i / nx) % ny) as f64;
            let z = (i / (nx * ny)) as f64;
            *c = [0.3 * x - 0.1 * z + 1.0, 0.2 * y, -0.4 * x + 0.05 * y];
        }
        assert!(bending_energy(&t, &s) < 1e-8);
    }

    #[test]
    fn operator_matches_pointwise_energy_and_gradient() {
        let (mut t, s) = grid();
        let mut rng = SplitMix64::new(4);
        for c in t.coefficients.iter_mut() {
            *c = [rng.normal(), rng.normal(), rng.normal()];
        }
        let op = BendingOperator::new(&t, &s);
        let e = bending_energy(&t, &s);
        assert!((op.energy(&t.coefficients) - e).abs() < 1e-9 * e.max(1.0));
        let g = op.gradient(&t.coefficients);
        let mut c = t.coefficients.clone();
        for (j, k) in [(40usize, 0usize), (120, 1), (250, 2)] {
            let h = 1e-4;
            c[j][k] += h;
            let ep = op.energy(&c);
            c[j][k] -= 2.0 * h;
            let em = op.energy(&c);
            c[j][k] += h;
            assert!(((ep - em) / (2.0 * h) - g[j][k]).abs() < 1e-6);
        }
    }
}
