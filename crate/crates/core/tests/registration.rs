use medkit::phantom::{
    gen_brain_phantom, gen_lung_slice, gen_registration_pair, BrainPhantomConfig, LungSliceConfig, PairConfig,
};
use medkit::registration::{
    register, resample, similarity, transform_landmarks, AffineTransform, Interpolation, Metric, PresetLibrary, Stage,
    TransformChain,
};
use medkit::{LandmarkSet, ScalarVolume};
use proptest::prelude::*;

fn mean_tre(pred: &LandmarkSet, truth: &LandmarkSet) -> f64 {
    let s = truth.spacing;
    pred.points
        .iter()
        .zip(&truth.points)
        .map(|(a, b)| (0..3).map(|k| ((a[k] - b[k]) * s[k]).powi(2)).sum::<f64>().sqrt())
        .sum::<f64>()
        / truth.len() as f64
}

#[test]
fn rigid_motion_recovered_on_lung_slice() {
    let slice = gen_lung_slice(&LungSliceConfig {
        size: 128,
        seed: 3,
        ..Default::default()
    })
    .unwrap();
    let cfg = PairConfig {
        translation: [4.0, -3.0],
        rotation_deg: 5.0,
        amplitude: 0.0,
        ..Default::default()
    };
    let pair = gen_registration_pair(&slice.image, &cfg).unwrap();
    let maps = PresetLibrary::get("affine-mse", pair.fixed.geometry()).unwrap();
    let r = register(&pair.fixed, &pair.moving, &maps, 5).unwrap();
    let tre = mean_tre(
        &transform_landmarks(&r.chain, &pair.fixed_landmarks),
        &pair.moving_landmarks,
    );
    assert!(tre <= 0.5, "mean TRE {tre}");
}

fn structured() -> ScalarVolume {
    gen_brain_phantom(&BrainPhantomConfig {
        dims: [24, 24, 24],
        ..Default::default()
    })
    .unwrap()
    .intensity
}

fn shift(v: &ScalarVolume, d: [f64; 3]) -> ScalarVolume {
    let chain = TransformChain::from_stages(vec![Stage::Affine(AffineTransform::translation(d))]);
    resample(v, &chain, v.geometry(), Interpolation::Linear).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn self_information_dominates_shifted(dx in -4i32..=4, dy in -4i32..=4, dz in -2i32..=2) {
        prop_assume!(dx != 0 || dy != 0 || dz != 0);
        let v = structured();
        let w = shift(&v, [dx as f64, dy as f64, dz as f64]);
        let own = -similarity(&v, &v, Metric::Mi, 64, None).unwrap();
        let other = -similarity(&v, &w, Metric::Mi, 64, None).unwrap();
        prop_assert!(other >= 0.0);
        prop_assert!(own >= other);
    }

    #[test]
    fn ncc_ignores_positive_affine_rescaling(a in 0.01f64..50.0, b in -10.0f64..10.0, sub in 0.1f64..3.0) {
        let v = structured();
        let w = shift(&v, [sub, 0.0, 0.0]);
        let base = similarity(&v, &w, Metric::Ncc, 64, None).unwrap();
        let scaled = w.map(|x| a * x + b).unwrap();
        prop_assert!((similarity(&v, &scaled, Metric::Ncc, 64, None).unwrap() - base).abs() < 1e-9);
        let scaled_fixed = v.map(|x| a * x + b).unwrap();
        prop_assert!((similarity(&scaled_fixed, &w, Metric::Ncc, 64, None).unwrap() - base).abs() < 1e-9);
    }

    #[test]
    fn chained_affines_equal_composition(
        t1 in prop::array::uniform3(-5.0f64..5.0),
        t2 in prop::array::uniform3(-5.0f64..5.0),
        a1 in prop::array::uniform3(-0.3f64..0.3),
        a2 in prop::array::uniform3(-0.3f64..0.3),
        p in prop::array::uniform3(-50.0f64..50.0),
    ) {
        let x = AffineTransform::rigid(a1, t1, [3.0, -2.0, 1.0]);
        let y = AffineTransform::rigid(a2, t2, [10.0, 0.0, -4.0]);
        let chain = TransformChain::from_stages(vec![Stage::Affine(x.clone()), Stage::Affine(y.clone())]);
        let a = chain.apply(p);
        let b = x.then(&y).apply(p);
        for k in 0..3 {
            prop_assert!((a[k] - b[k]).abs() < 1e-9);
        }
    }
}

#[test]
fn identity_resample_is_identity() {
    let v = structured();
    for interp in [Interpolation::Nearest, Interpolation::Linear] {
        assert_eq!(
            resample(&v, &TransformChain::identity(), v.geometry(), interp).unwrap(),
            v
        );
    }
}
