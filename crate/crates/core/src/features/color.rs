//! RGB/HSV conversion (hexcone model) and per-channel colour statistics.

use crate::error::{Error, Result};
use crate::volume::ColorImage;

/// RGB in [0,1] to (hue degrees in [0,360), saturation, value).
pub fn rgb_to_hsv_f(rgb: [f64; 3]) -> [f64; 3] {
    let [r, g, b] = rgb;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    if delta <= 0.0 {
        return [0.0, s, max];
    }
    let h = if max == r {
        60.0 * ((g - b) / delta)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    [h.rem_euclid(360.0), s, max]
}

/// Inverse of [`rgb_to_hsv_f`]; hue may be any real (wrapped).
pub fn hsv_to_rgb_f(hsv: [f64; 3]) -> [f64; 3] {
    let [h, s, v] = hsv;
    let h = h.rem_euclid(360.0) / 60.0;
    let sector = (h.floor() as usize).min(5);
    let f = h - sector as f64;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match sector {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

fn to_byte(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// 8-bit HSV image: H scaled so 255 ≡ 360° (stored as 0), S and V on 0..255.
pub fn rgb_to_hsv(img: &ColorImage) -> ColorImage {
    let data = img
        .data()
        .chunks_exact(3)
        .flat_map(|px| {
            let [h, s, v] = rgb_to_hsv_f([px[0] as f64 / 255.0, px[1] as f64 / 255.0, px[2] as f64 / 255.0]);
            let hb = (h * 255.0 / 360.0).round() as u32 % 255;
            [hb as u8, to_byte(s * 255.0), to_byte(v * 255.0)]
        })
        .collect();
    ColorImage::new(img.width(), img.height(), data).expect("same size")
}

/// Inverse of [`rgb_to_hsv`].
pub fn hsv_to_rgb(img: &ColorImage) -> ColorImage {
    let data = img
        .data()
        .chunks_exact(3)
        .flat_map(|px| {
            let rgb = hsv_to_rgb_f([px[0] as f64 * 360.0 / 255.0, px[1] as f64 / 255.0, px[2] as f64 / 255.0]);
            rgb.map(|c| to_byte(c * 255.0))
        })
        .collect();
    ColorImage::new(img.width(), img.height(), data).expect("same size")
}

/// Names of the seven statistics reported per channel.
pub const STAT_NAMES: [&str; 7] = ["mean", "std", "min", "max", "skewness", "kurtosis", "entropy"];
pub const CHANNEL_NAMES: [&str; 6] = ["r", "g", "b", "h", "s", "v"];

/// Mean, sample std, min, max, skewness, excess kurtosis and 256-bin entropy
/// (bits) of 8-bit samples.
pub fn channel_stats(values: &[u8]) -> [f64; 7] {
    let n = values.len() as f64;
    let mut hist = [0u64; 256];
    for &v in values {
        hist[v as usize] += 1;
    }
    let mean = values.iter().map(|&v| v as f64).sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in values {
        let d = v as f64 - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let std = if values.len() > 1 { (m2 / (n - 1.0)).sqrt() } else { 0.0 };
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    let (skew, kurt) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };
    let entropy = hist
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0);
    let min = values.iter().copied().min().unwrap_or(0) as f64;
    let max = values.iter().copied().max().unwrap_or(0) as f64;
    [mean, std, min, max, skew, kurt, entropy]
}

/// 42 colour statistics: RGB then HSV channels, seven statistics each.
pub fn color_stats(img: &ColorImage, mask: &[bool]) -> Result<Vec<f64>> {
    let n = img.width() * img.height();
    if mask.len() != n {
        return Err(Error::invalid("mask size does not match image"));
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::invalid("empty mask"));
    }
    let hsv = rgb_to_hsv(img);
    let mut out = Vec::with_capacity(42);
    for src in [img, &hsv] {
        for c in 0..3 {
            let vals: Vec<u8> = src
                .data()
                .chunks_exact(3)
                .zip(mask)
                .filter(|(_, &m)| m)
                .map(|(px, _)| px[c])
                .collect();
            out.extend_from_slice(&channel_stats(&vals));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn reference_colors() {
        let img = ColorImage::new(2, 1, vec![255, 0, 0, 128, 128, 128]).unwrap();
        let hsv = rgb_to_hsv(&img);
        assert_eq!(hsv.pixel(0, 0), [0, 255, 255]);
        assert_eq!(hsv.pixel(1, 0)[1..], [0, 128]);
    }

    #[test]
    fn float_round_trip_is_exact() {
        let mut rng = SplitMix64::new(12);
        for _ in 0..10_000 {
            let rgb = [rng.next_f64(), rng.next_f64(), rng.next_f64()];
            let back = hsv_to_rgb_f(rgb_to_hsv_f(rgb));
            for k in 0..3 {
                assert!((rgb[k] - back[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn byte_round_trip_within_hue_quantisation() {
        // 255 hue codes cannot separate the 1530 fully saturated colours,
        // so the 8-bit round trip is bounded by half a hue step (≤ 3 levels).
        let mut rng = SplitMix64::new(13);
        let data: Vec<u8> = (0..3 * 4096).map(|_| rng.below(256) as u8).collect();
        let img = ColorImage::new(64, 64, data).unwrap();
        let back = hsv_to_rgb(&rgb_to_hsv(&img));
        let worst = img
            .data()
            .iter()
            .zip(back.data())
            .map(|(a, b)| (*a as i32 - *b as i32).abs())
            .max()
            .unwrap();
        assert!(worst <= 3, "{worst}");
    }

    #[test]
    fn stats_conventions() {
        let c = channel_stats(&[7; 20]);
        assert_eq!(c, [7.0, 0.0, 7.0, 7.0, 0.0, 0.0, 0.0]);
        let all: Vec<u8> = (0..=255).collect();
        assert!((channel_stats(&all)[6] - 8.0).abs() < 1e-12);
        let two: Vec<u8> = [10u8, 200].iter().cycle().take(50).copied().collect();
        assert!(channel_stats(&two)[4].abs() < 1e-12);
    }

    #[test]
    fn stats_match_naive_oracle() {
        let mut rng = SplitMix64::new(14);
        let vals: Vec<u8> = (0..333)
            .map(|_| (rng.normal() * 30.0 + 100.0).clamp(0.0, 255.0) as u8)
            .collect();
        let s = channel_stats(&vals);
        let x: Vec<f64> = vals.iter().map(|&v| v as f64).collect();
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var_s = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let m3 = x.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
        let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
        assert!((s[0] - mean).abs() < 1e-9);
        assert!((s[1] - var_s.sqrt()).abs() < 1e-9);
        assert!((s[4] - m3 / m2.powf(1.5)).abs() < 1e-9);
        assert!((s[5] - (m4 / (m2 * m2) - 3.0)).abs() < 1e-9);
    }

    #[test]
    fn color_stats_layout() {
        let img = ColorImage::filled(4, 4, [10, 20, 30]);
        let v = color_stats(&img, &[true; 16]).unwrap();
        assert_eq!(v.len(), 42);
        assert!(color_stats(&img, &[false; 16]).is_err());
    }
}
