use crate::volume::ScalarVolume;

/// Min-max scaling to `[0, 1]` using statistics over `mask` (or all voxels).
/// Voxels outside the mask are scaled the same way and clamped. A flat
/// range yields all zeros.
pub fn minmax_normalize(vol: &ScalarVolume, mask: Option<&[bool]>) -> ScalarVolume {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, &v) in vol.data().iter().enumerate() {
        if mask.is_none_or(|m| m[i]) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let data = if hi > lo {
        vol.data()
            .iter()
            .map(|&v| ((v - lo) / (hi - lo)).clamp(0.0, 1.0))
            .collect()
    } else {
        vec![0.0; vol.data().len()]
    };
    ScalarVolume::from_parts_unchecked(*vol.geometry(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn three_values() {
        let v = ScalarVolume::image(3, 1, vec![0.0, 5.0, 10.0]).unwrap();
        assert_eq!(minmax_normalize(&v, None).data(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn constant_gives_zeros() {
        let v = ScalarVolume::image(2, 2, vec![7.0; 4]).unwrap();
        assert_eq!(minmax_normalize(&v, None).data(), &[0.0; 4]);
    }

    #[test]
    fn random_spans_unit_interval_and_is_idempotent() {
        let mut rng = SplitMix64::new(5);
        let v = ScalarVolume::image(16, 16, (0..256).map(|_| rng.normal() * 40.0 + 3.0).collect()).unwrap();
        let n = minmax_normalize(&v, None);
        let (lo, hi) = n.min_max();
        assert_eq!((lo, hi), (0.0, 1.0));
        assert_eq!(minmax_normalize(&n, None), n);
    }

    #[test]
    fn masked_statistics_clamp_outside() {
        let v = ScalarVolume::image(4, 1, vec![-5.0, 1.0, 3.0, 9.0]).unwrap();
        let mask = [false, true, true, false];
        assert_eq!(minmax_normalize(&v, Some(&mask)).data(), &[0.0, 0.0, 1.0, 1.0]);
    }
}
