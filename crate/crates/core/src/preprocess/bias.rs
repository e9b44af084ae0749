//! Multiplicative bias-field correction by a low-order polynomial fitted in
//! the log domain.
//!
//! The field model is `log(v + ε) ≈ Σ c_ijk · xⁱ yʲ zᵏ` with `i + j + k ≤
//! order`, coordinates mapped to `[-1, 1]` per axis. Axes of extent 1 carry
//! no terms. The fit is ordinary least squares over the mask.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Geometry, ScalarVolume};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BiasFieldConfig {
    pub polynomial_order: usize,
    pub epsilon: f64,
}

impl Default for BiasFieldConfig {
    fn default() -> Self {
        Self {
            polynomial_order: 3,
            epsilon: 1e-6,
        }
    }
}

impl BiasFieldConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.polynomial_order) {
            return Err(Error::invalid(format!(
                "polynomial_order must be in [1, 4], got {}",
                self.polynomial_order
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BiasCorrection {
    pub corrected: ScalarVolume,
    /// Estimated multiplicative field; `corrected = input / field` in the mask.
    pub field: ScalarVolume,
}

fn exponents(geom: &Geometry, order: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for i in 0..=order {
        for j in 0..=order - i {
            for k in 0..=order - i - j {
                let e = [i, j, k];
                if (0..3).all(|a| geom.dims[a] > 1 || e[a] == 0) {
                    out.push(e);
                }
            }
        }
    }
    out
}

fn unit_coord(i: usize, n: usize) -> f64 {
    if n > 1 {
        2.0 * i as f64 / (n - 1) as f64 - 1.0
    } else {
        0.0
    }
}

fn basis_row(geom: &Geometry, idx: usize, exps: &[[usize; 3]], row: &mut [f64]) {
    let c = geom.coords(idx);
    let u = [
        unit_coord(c[0], geom.dims[0]),
        unit_coord(c[1], geom.dims[1]),
        unit_coord(c[2], geom.dims[2]),
    ];
    for (r, e) in row.iter_mut().zip(exps) {
        *r = u[0].powi(e[0] as i32) * u[1].powi(e[1] as i32) * u[2].powi(e[2] as i32);
    }
}

pub fn correct_bias(vol: &ScalarVolume, mask: &[bool], cfg: &BiasFieldConfig) -> Result<BiasCorrection> {
    cfg.validate()?;
    let geom = *vol.geometry();
    if mask.len() != geom.len() {
        return Err(Error::Geometry("mask size does not match volume".into()));
    }
    let exps = exponents(&geom, cfg.polynomial_order);
    let m = exps.len();
    let masked: Vec<usize> = (0..geom.len()).filter(|&i| mask[i]).collect();
    if masked.is_empty() {
        return Err(Error::invalid("empty mask"));
    }
    if masked.len() < m {
        return Err(Error::Singular(format!(
            "{} masked voxels cannot determine {m} polynomial terms",
            masked.len()
        )));
    }
    if let Some(&i) = masked.iter().find(|&&i| vol.data()[i] + cfg.epsilon <= 0.0) {
        return Err(Error::invalid(format!(
            "bias correction needs positive intensities (voxel {i})"
        )));
    }

    let mut ata = DMatrix::<f64>::zeros(m, m);
    let mut atb = DVector::<f64>::zeros(m);
    let mut row = vec![0.0; m];
    for &i in &masked {
        basis_row(&geom, i, &exps, &mut row);
        let y = (vol.data()[i] + cfg.epsilon).ln();
        for a in 0..m {
            atb[a] += row[a] * y;
            for b in a..m {
                ata[(a, b)] += row[a] * row[b];
            }
        }
    }
    for a in 0..m {
        for b in 0..a {
            ata[(a, b)] = ata[(b, a)];
        }
    }
    let chol = ata
        .cholesky()
        .ok_or_else(|| Error::Singular("normal equations are not positive definite".into()))?;
    let coef = chol.solve(&atb);

    let mut field: Vec<f64> = (0..geom.len())
        .map(|i| {
            basis_row(&geom, i, &exps, &mut row);
            row.iter().zip(coef.iter()).map(|(r, c)| r * c).sum::<f64>().exp()
        })
        .collect();
    let (mut sum_in, mut sum_out) = (0.0, 0.0);
    for &i in &masked {
        sum_in += vol.data()[i];
        sum_out += vol.data()[i] / field[i];
    }
    // Preserve the masked mean: fold the global scale into the field.
    let scale = if sum_out != 0.0 { sum_in / sum_out } else { 1.0 };
    for f in field.iter_mut() {
        *f /= scale;
    }
    let corrected: Vec<f64> = vol
        .data()
        .iter()
        .zip(&field)
        .zip(mask)
        .map(|((&v, &f), &m)| if m { v / f } else { v })
        .collect();
    Ok(BiasCorrection {
        corrected: ScalarVolume::new(geom, corrected)?,
        field: ScalarVolume::new(geom, field)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn ball_phantom(n: usize, seed: u64) -> (ScalarVolume, Vec<bool>) {
        let geom = Geometry::unit([n, n, n]);
        let mut rng = SplitMix64::new(seed);
        let c = (n as f64 - 1.0) / 2.0;
        let r = 0.45 * n as f64;
        let mut data = vec![0.0; geom.len()];
        let mut mask = vec![false; geom.len()];
        for i in 0..geom.len() {
            let [x, y, z] = geom.coords(i);
            let d2 = (x as f64 - c).powi(2) + (y as f64 - c).powi(2) + (z as f64 - c).powi(2);
            if d2 <= r * r {
                mask[i] = true;
                data[i] = 0.6 * (1.0 + 0.01 * rng.normal());
            }
        }
        (ScalarVolume::new(geom, data).unwrap(), mask)
    }

    fn rms_rel(a: &[f64], b: &[f64], mask: &[bool]) -> f64 {
        let mut s = 0.0;
        let mut n = 0.0;
        for i in 0..a.len() {
            if mask[i] {
                s += ((a[i] - b[i]) / b[i]).powi(2);
                n += 1.0;
            }
        }
        (s / n).sqrt()
    }

    #[test]
    fn bias_free_input_is_left_alone() {
        let (vol, mask) = ball_phantom(20, 1);
        let out = correct_bias(&vol, &mask, &BiasFieldConfig::default()).unwrap();
        assert!(rms_rel(out.corrected.data(), vol.data(), &mask) < 0.01);
        let (lo, hi) = out
            .field
            .data()
            .iter()
            .zip(&mask)
            .filter(|(_, &m)| m)
            .fold((f64::MAX, f64::MIN), |(lo, hi), (&f, _)| (lo.min(f), hi.max(f)));
        assert!(hi / lo < 1.02, "field range {lo}..{hi}");
    }

    #[test]
    fn removes_smooth_quadratic_field() {
        let (vol, mask) = ball_phantom(20, 2);
        let g = *vol.geometry();
        let biased: Vec<f64> = (0..g.len())
            .map(|i| {
                let [x, y, z] = g.coords(i);
                let (u, v, w) = (unit_coord(x, 20), unit_coord(y, 20), unit_coord(z, 20));
                vol.data()[i] * (1.0 + 0.08 * u - 0.06 * v * v + 0.05 * u * w)
            })
            .collect();
        let biased = ScalarVolume::new(g, biased).unwrap();
        let before = rms_rel(biased.data(), vol.data(), &mask);
        let out = correct_bias(&biased, &mask, &BiasFieldConfig::default()).unwrap();
        // Compare up to a global scale.
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..g.len() {
            if mask[i] {
                num += out.corrected.data()[i];
                den += vol.data()[i];
            }
        }
        let scaled: Vec<f64> = out.corrected.data().iter().map(|v| v * den / num).collect();
        let after = rms_rel(&scaled, vol.data(), &mask);
        assert!(after < 0.02, "after {after}, before {before}");
        assert!(after < before);
    }

    #[test]
    fn tiny_mask_is_singular() {
        let (vol, _) = ball_phantom(10, 3);
        let mut mask = vec![false; vol.data().len()];
        for i in [555, 556, 557] {
            mask[i] = true;
        }
        assert!(matches!(
            correct_bias(&vol, &mask, &BiasFieldConfig::default()),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn outside_mask_untouched() {
        let (vol, mask) = ball_phantom(12, 4);
        let out = correct_bias(&vol, &mask, &BiasFieldConfig::default()).unwrap();
        for i in 0..mask.len() {
            if !mask[i] {
                assert_eq!(out.corrected.data()[i], vol.data()[i]);
            }
        }
    }
}
