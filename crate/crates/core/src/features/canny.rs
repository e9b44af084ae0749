//! Canny edge detector: Gaussian blur, Sobel gradients, non-maximum
//! suppression over four directions and 8-connected hysteresis.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::registration::gaussian_smooth;
use crate::volume::ScalarVolume;

/// Sobel gradients `(gx, gy)` with clamped borders.
pub fn sobel(img: &ScalarVolume) -> (Vec<f64>, Vec<f64>) {
    let [w, h, _] = img.dims();
    let d = img.data();
    let at = |x: isize, y: isize| d[y.clamp(0, h as isize - 1) as usize * w + x.clamp(0, w as isize - 1) as usize];
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            gx[i] = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            gy[i] = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
        }
    }
    (gx, gy)
}

/// Neighbour step along the gradient, quantised to 0°, 45°, 90° or 135°.
fn direction_step(gx: f64, gy: f64) -> (isize, isize) {
    let mut a = gy.atan2(gx).to_degrees();
    if a < 0.0 {
        a += 180.0;
    }
    if !(22.5..157.5).contains(&a) {
        (1, 0)
    } else if a < 67.5 {
        (1, 1)
    } else if a < 112.5 {
        (0, 1)
    } else {
        (-1, 1)
    }
}

/// Binary edge map. `low` and `high` are fractions of the peak gradient.
pub fn canny(gray: &ScalarVolume, sigma: f64, low: f64, high: f64) -> Result<Vec<bool>> {
    let [w, h, depth] = gray.dims();
    if depth != 1 {
        return Err(Error::invalid("Canny needs a 2D image"));
    }
    if !(low > 0.0 && high <= 1.0 && low <= high) {
        return Err(Error::invalid("thresholds must satisfy 0 < low ≤ high ≤ 1"));
    }
    let blurred = gaussian_smooth(gray, sigma);
    let (gx, gy) = sobel(&blurred);
    let mag: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).collect();
    let peak = mag.iter().cloned().fold(0.0, f64::max);
    if !(peak > 1e-12) {
        return Ok(vec![false; w * h]);
    }
    let get = |x: isize, y: isize| {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };
    // Strict on one side, non-strict on the other: a two-pixel plateau keeps one pixel.
    let mut thin = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            let m = mag[i];
            if m == 0.0 {
                continue;
            }
            let (dx, dy) = direction_step(gx[i], gy[i]);
            if m > get(x - dx, y - dy) && m >= get(x + dx, y + dy) {
                thin[i] = m;
            }
        }
    }
    let (lo, hi) = (low * peak, high * peak);
    let mut edges = vec![false; w * h];
    let mut queue = VecDeque::new();
    for i in 0..w * h {
        if thin[i] >= hi {
            edges[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if !edges[j] && thin[j] >= lo {
                    edges[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    Ok(edges)
}
