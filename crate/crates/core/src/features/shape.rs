//! Shape descriptors of a binary lesion mask: area, contour perimeter,
//! circularity, compactness and the seven Hu moment invariants.
//!
//! Central moments are carried as exact integers scaled by powers of the
//! area, so every Hu invariant is an integer polynomial over `m00^k`. That
//! makes them exactly invariant to translation and to 90° grid rotations.

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::morphology::{contour_length, largest_component, trace_contour};

pub const SHAPE_NAMES: [&str; 11] = [
    "area",
    "perimeter",
    "circularity",
    "compactness",
    "log_hu1",
    "log_hu2",
    "log_hu3",
    "log_hu4",
    "log_hu5",
    "log_hu6",
    "log_hu7",
];

const CIRCULARITY_CAP: f64 = 1.05;

fn binom(n: u32, k: u32) -> i64 {
    (0..k).fold(1i64, |acc, i| acc * (n - i) as i64 / (i + 1) as i64)
}

/// Exact integers `S_pq = Σ (m00·x − m10)^p (m00·y − m01)^q` for p + q ≤ 3,
/// indexed `[p][q]`, together with `m00`.
fn scaled_central_moments(mask: &[bool], width: usize) -> (i128, [[BigInt; 4]; 4]) {
    let mut raw = [[0i128; 4]; 4];
    for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        let (x, y) = ((i % width) as i128, (i / width) as i128);
        let xs = [1, x, x * x, x * x * x];
        let ys = [1, y, y * y, y * y * y];
        for p in 0..4 {
            for q in 0..4 - p {
                raw[p][q] += xs[p] * ys[q];
            }
        }
    }
    let a = raw[0][0];
    let big = |v: i128| BigInt::from(v);
    let cx = big(-raw[1][0]);
    let cy = big(-raw[0][1]);
    let mut s: [[BigInt; 4]; 4] = Default::default();
    for p in 0..4u32 {
        for q in 0..4 - p {
            let mut total = BigInt::zero();
            for i in 0..=p {
                for j in 0..=q {
                    let term = BigInt::from(binom(p, i) * binom(q, j))
                        * num_traits::pow(big(a), (i + j) as usize)
                        * big(raw[i as usize][j as usize])
                        * num_traits::pow(cx.clone(), (p - i) as usize)
                        * num_traits::pow(cy.clone(), (q - j) as usize);
                    total += term;
                }
            }
            s[p as usize][q as usize] = total;
        }
    }
    (a, s)
}

/// Natural log of |n| for arbitrarily large integers.
fn ln_abs(n: &BigInt) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        return n.abs().to_f64().expect("fits in f64").ln();
    }
    let shift = bits - 64;
    let top: BigInt = n.abs() >> shift;
    top.to_f64().expect("64-bit value").ln() + shift as f64 * std::f64::consts::LN_2
}

/// `sign(h)·log10(|h| + 1e-30)` for `h = num / a^k`.
fn signed_log(num: &BigInt, a: i128, k: i32) -> f64 {
    if num.is_zero() {
        return -30.0;
    }
    let ln_h = ln_abs(num) - k as f64 * (a as f64).ln();
    let mag = ln_h.exp();
    let v = (mag + 1e-30).log10();
    if num.is_negative() {
        -v
    } else {
        v
    }
}

/// The seven Hu invariants as `(numerator, power of m00)` pairs.
fn hu_numerators(s: &[[BigInt; 4]; 4]) -> [(BigInt, i32); 7] {
    let (n20, n02, n11) = (&s[2][0], &s[0][2], &s[1][1]);
    let (n30, n03, n21, n12) = (&s[3][0], &s[0][3], &s[2][1], &s[1][2]);
    let three = BigInt::from(3);
    let four = BigInt::from(4);
    let a = n30 - &three * n12; // η30 − 3η12
    let b = &three * n21 - n03; // 3η21 − η03
    let c = n30 + n12;
    let d = n21 + n03;
    let c2 = &c * &c;
    let d2 = &d * &d;
    let diff = n20 - n02;
    let h1 = n20 + n02;
    let h2 = &diff * &diff + &four * n11 * n11;
    let h3 = &a * &a + &b * &b;
    let h4 = &c2 + &d2;
    let h5 = &a * &c * (&c2 - &three * &d2) + &b * &d * (&three * &c2 - &d2);
    let h6 = &diff * (&c2 - &d2) + &four * n11 * &c * &d;
    let h7 = &b * &c * (&c2 - &three * &d2) - &a * &d * (&three * &c2 - &d2);
    [(h1, 4), (h2, 8), (h3, 11), (h4, 11), (h5, 22), (h6, 15), (h7, 22)]
}

/// Log-scaled Hu invariants of a non-empty mask.
pub fn log_hu_moments(mask: &[bool], width: usize) -> Result<[f64; 7]> {
    if !mask.iter().any(|&m| m) {
        return Err(Error::invalid("Hu moments need a non-empty mask"));
    }
    let (a, s) = scaled_central_moments(mask, width);
    Ok(hu_numerators(&s).map(|(n, k)| signed_log(&n, a, k)))
}

/// Area, perimeter, circularity, compactness and log-Hu of the largest
/// 8-connected component.
pub fn shape_features(mask: &[bool], width: usize, height: usize) -> Result<Vec<f64>> {
    if mask.len() != width * height {
        return Err(Error::Geometry("mask size does not match image".into()));
    }
    let comp = largest_component(mask, width, height).ok_or_else(|| Error::invalid("empty lesion mask"))?;
    let area = comp.iter().filter(|&&m| m).count() as f64;
    let perimeter = contour_length(&trace_contour(&comp, width, height));
    let (circularity, compactness) = if perimeter > 0.0 {
        (
            (4.0 * std::f64::consts::PI * area / (perimeter * perimeter)).min(CIRCULARITY_CAP),
            perimeter * perimeter / area,
        )
    } else {
        (CIRCULARITY_CAP, 0.0)
    };
    let mut out = vec![area, perimeter, circularity, compactness];
    out.extend(log_hu_moments(&comp, width)?);
    Ok(out)
}
