//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (no libtest harness) so each criterion reports
//! its measured numbers. Set `MEDKIT_ACCEPTANCE_STRICT=1` to turn any FAIL
//! into a nonzero exit.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use medkit::atlas::{
    build_tissue_models, foreground_mask, fuse_majority, fuse_mi_weighted, leave_one_out, segment_label_propagation,
    segment_tissue_model, AtlasEntry, BrainCase, SegmentationConfig, SegmentationMethod,
};
use medkit::features::glcm::{glcm_features, glcm_offset, quantize, GlcmConfig};
use medkit::features::{extract_batch, log_hu_moments};
use medkit::metrics::{classification_report, cohen_kappa, roc_auc, score_segmentation, ConfusionMatrix, SegScore};
use medkit::ml::mlp::{mlp_loss, mlp_loss_grad, MlpParams};
use medkit::ml::{
    class_counts, cross_validate, pca_fit, predict_proba, smote, train, ClassifierSpec, ForestSpec, MlpSpec,
    PipelineConfig, SplitConfig,
};
use medkit::phantom::{
    gen_atlas_population, gen_brain_phantom, gen_brain_suite, gen_lesion_dataset, gen_lung_slice,
    gen_registration_pair, AffineRanges, BrainPhantomConfig, BrainSuiteConfig, LesionClassKnobs, LesionDatasetConfig,
    LungSliceConfig, PairConfig,
};
use medkit::preprocess::{
    clahe, detect_fov, minmax_normalize, otsu_threshold, preprocess_ct_slice, CtPreprocessConfig,
};
use medkit::registration::{
    bending_energy, mutual_information, normalized_cross_correlation, register, resample, transform_landmarks,
    AffineTransform, BsplineTransform, Interpolation, PresetLibrary, Stage, TransformChain,
};
use medkit::rng::SplitMix64;
use medkit::{Geometry, LabelVolume, LandmarkSet, ScalarVolume};
use medkit_cli::commands::{cmd_classify, cmd_register, Ctx};
use medkit_cli::config::{Balance, LesionRun, LungRun, LungSource, NamedModel};
use medkit_cli::run_args;

struct Outcome {
    pass: bool,
    detail: String,
}

/// Accumulates named checks; the criterion passes when all of them do.
#[derive(Default)]
struct Checks {
    items: Vec<(bool, String)>,
}

impl Checks {
    fn check(&mut self, ok: bool, msg: impl Into<String>) {
        self.items.push((ok, msg.into()));
    }

    fn note(&mut self, msg: impl Into<String>) {
        self.items.push((true, msg.into()));
    }

    fn done(self) -> Outcome {
        let pass = self.items.iter().all(|(ok, _)| *ok);
        let detail = self
            .items
            .iter()
            .map(|(ok, m)| if *ok { m.clone() } else { format!("[FAILED] {m}") })
            .collect::<Vec<_>>()
            .join("; ");
        Outcome { pass, detail }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn normalised(v: &ScalarVolume) -> ScalarVolume {
    minmax_normalize(v, None)
}

fn dices(s: &SegScore) -> Vec<f64> {
    s.classes.iter().map(|c| c.dice).collect()
}

fn fmt3(v: &[f64]) -> String {
    v.iter().map(|d| format!("{d:.3}")).collect::<Vec<_>>().join("/")
}

// ---------------------------------------------------------------- 1 and 2

/// Numbers from the σ = 0.02 population, reused by criterion 2.
struct PopulationResult {
    majority: Vec<f64>,
    tissue_model: Vec<f64>,
}

fn population_fusion(pop_out: &mut Option<PopulationResult>) -> Outcome {
    let start = Instant::now();
    let mut c = Checks::default();
    let base = gen_brain_phantom(&BrainPhantomConfig {
        noise_sigma: 0.02,
        bias_amplitude: 0.0,
        ..Default::default()
    })
    .unwrap();
    let g = *base.intensity.geometry();
    let pop = gen_atlas_population(&base, 5, AffineRanges::default(), 21).unwrap();
    let maps = PresetLibrary::get("affine-mi", &g).unwrap();
    let target = normalised(&base.intensity);
    let members: Vec<(ScalarVolume, LabelVolume)> = pop
        .iter()
        .map(|m| (normalised(&m.intensity), m.labels.clone()))
        .collect();
    let propagate = |(v, l): &(ScalarVolume, LabelVolume), i: usize| -> AtlasEntry {
        segment_label_propagation(&target, (v, l), &maps, 3, &format!("member{i}")).unwrap()
    };
    let entries: Vec<AtlasEntry> = members.iter().enumerate().map(|(i, m)| propagate(m, i)).collect();

    let majority = score_segmentation(&fuse_majority(&entries).unwrap(), &base.labels, true).unwrap();
    let weighted = score_segmentation(&fuse_mi_weighted(&entries, &target, 64).unwrap(), &base.labels, true).unwrap();
    let (dm, dw) = (dices(&majority), dices(&weighted));
    c.check(
        dm.iter().all(|&d| d >= 0.90),
        format!("majority Dice CSF/GM/WM {} (≥ 0.90)", fmt3(&dm)),
    );
    c.check(
        (mean(&dw) - mean(&dm)).abs() <= 0.02,
        format!(
            "clean MI-weighted mean {:.3} vs majority {:.3} (within 0.02)",
            mean(&dw),
            mean(&dm)
        ),
    );

    // Member 0 replaced by pure noise: random intensities and random labels.
    let mut rng = SplitMix64::new(99);
    let noise = (
        ScalarVolume::new(g, (0..g.len()).map(|_| rng.next_f64()).collect()).unwrap(),
        LabelVolume::new(g, (0..g.len()).map(|_| rng.below(4) as u16).collect(), 4).unwrap(),
    );
    let mut noisy = entries.clone();
    noisy[0] = propagate(&noise, 0);
    let majority_n = score_segmentation(&fuse_majority(&noisy).unwrap(), &base.labels, true).unwrap();
    let weighted_n = score_segmentation(&fuse_mi_weighted(&noisy, &target, 64).unwrap(), &base.labels, true).unwrap();
    let gain = mean(&dices(&weighted_n)) - mean(&dices(&majority_n));
    c.check(
        gain >= 0.05,
        format!(
            "noise member: MI-weighted mean {:.3} vs majority {:.3}, gain {gain:.3} (≥ 0.05)",
            mean(&dices(&weighted_n)),
            mean(&dices(&majority_n))
        ),
    );

    let inputs: Vec<(&ScalarVolume, &LabelVolume)> = members.iter().map(|(v, l)| (v, l)).collect();
    let model = build_tissue_models(&inputs, 64).unwrap();
    let tm = segment_tissue_model(&target, &model, &foreground_mask(&base.intensity)).unwrap();
    *pop_out = Some(PopulationResult {
        majority: dm,
        tissue_model: dices(&score_segmentation(&tm, &base.labels, true).unwrap()),
    });

    let secs = start.elapsed().as_secs_f64();
    c.check(secs < 300.0, format!("runtime {secs:.0} s (< 300 s)"));
    c.done()
}

fn suite_ordering(pop: Option<&PopulationResult>) -> Outcome {
    let mut c = Checks::default();
    let cases: Vec<BrainCase> = gen_brain_suite(&BrainSuiteConfig::default())
        .unwrap()
        .into_iter()
        .enumerate()
        .map(|(i, p)| BrainCase {
            id: format!("case{i}"),
            intensity: p.intensity,
            labels: p.labels,
        })
        .collect();
    let cfg = SegmentationConfig {
        methods: vec![
            SegmentationMethod::TissueModel,
            SegmentationMethod::MajorityVoting,
            SegmentationMethod::MiWeighted,
        ],
        ..Default::default()
    };
    let out = leave_one_out(&cases, &cfg, 0).unwrap();
    let mut by_method: BTreeMap<SegmentationMethod, Vec<f64>> = BTreeMap::new();
    for (seg, case) in out.iter().zip(&cases) {
        for (m, labels) in &seg.outputs {
            let s = score_segmentation(labels, &case.labels, true).unwrap();
            by_method.entry(*m).or_default().extend(dices(&s));
        }
    }
    let tm = mean(&by_method[&SegmentationMethod::TissueModel]);
    let mv = mean(&by_method[&SegmentationMethod::MajorityVoting]);
    let mi = mean(&by_method[&SegmentationMethod::MiWeighted]);
    c.check(mv >= tm, format!("suite: majority {mv:.3} ≥ tissue model {tm:.3}"));
    c.check(mi >= tm, format!("suite: MI-weighted {mi:.3} ≥ tissue model {tm:.3}"));
    if let Some(p) = pop {
        c.note(format!(
            "σ=0.02 population (informational): majority {:.3}, tissue model {:.3}",
            mean(&p.majority),
            mean(&p.tissue_model)
        ));
    }
    c.done()
}

// ---------------------------------------------------------------- 3

fn mean_tre(pred: &LandmarkSet, truth: &LandmarkSet) -> f64 {
    let s = truth.spacing;
    mean(
        &pred
            .points
            .iter()
            .zip(&truth.points)
            .map(|(a, b)| (0..3).map(|k| ((a[k] - b[k]) * s[k]).powi(2)).sum::<f64>().sqrt())
            .collect::<Vec<_>>(),
    )
}

fn registration_recovery(work: &Path) -> Outcome {
    let mut c = Checks::default();
    let slice = gen_lung_slice(&LungSliceConfig {
        size: 128,
        seed: 3,
        ..Default::default()
    })
    .unwrap();
    let rigid = PairConfig {
        translation: [4.0, -3.0],
        rotation_deg: 5.0,
        amplitude: 0.0,
        ..Default::default()
    };
    let pair = gen_registration_pair(&slice.image, &rigid).unwrap();
    let maps = PresetLibrary::get("affine-mse", pair.fixed.geometry()).unwrap();
    let r = register(&pair.fixed, &pair.moving, &maps, 5).unwrap();
    let tre = mean_tre(
        &transform_landmarks(&r.chain, &pair.fixed_landmarks),
        &pair.moving_landmarks,
    );
    let voxel = pair.fixed.geometry().spacing[0];
    c.check(
        tre <= 0.5 * voxel && pair.fixed_landmarks.len() == 100,
        format!(
            "rigid (5 vox, 5°): mean TRE {:.3} vox over {} landmarks (≤ 0.5)",
            tre / voxel,
            pair.fixed_landmarks.len()
        ),
    );

    let run = LungRun {
        source: LungSource::Phantom {
            slice: LungSliceConfig {
                size: 128,
                ..Default::default()
            },
            pair: PairConfig::default(),
            cases: 1,
        },
        ..Default::default()
    };
    let ctx = Ctx {
        out_dir: work.join("c3"),
        one_based: false,
    };
    let report = cmd_register(&ctx, &run).unwrap();
    let detail = report.table("tre_detail").unwrap();
    let mean_of = |preset: &str| -> f64 {
        let row = detail.rows.iter().find(|r| r[0] == "case01" && r[1] == preset).unwrap();
        row[2].parse().unwrap()
    };
    let affine = mean_of("affine-mse").min(mean_of("affine-mi"));
    let combined = mean_of("combined-best");
    c.check(
        combined <= 0.5 * affine,
        format!(
            "smooth deformation: combined-best {combined:.3} mm vs best affine {affine:.3} mm, reduction {:.0}% (≥ 50%)",
            100.0 * (1.0 - combined / affine)
        ),
    );
    let lowest = PresetLibrary::names().iter().all(|p| mean_of(p) >= combined);
    c.check(lowest, "combined-best has the lowest mean TRE of all presets");
    let cell = report
        .table("tre")
        .unwrap()
        .cell("combined-best", "case01")
        .unwrap()
        .to_string();
    let shaped = cell.split(" ± ").count() == 2
        && cell
            .split(" ± ")
            .all(|p| p.split('.').nth(1).is_some_and(|d| d.len() == 2));
    c.check(shaped, format!("cell format {cell:?}"));
    c.done()
}

// ---------------------------------------------------------------- 4

fn ct_preprocessing() -> Outcome {
    let mut c = Checks::default();
    let cfg = CtPreprocessConfig::default();
    let (mut worst_ring, mut worst_body) = (1.0f64, 1.0f64);
    let mut fov_ok = true;
    for seed in [7, 8, 9] {
        let s = gen_lung_slice(&LungSliceConfig {
            seed,
            ..Default::default()
        })
        .unwrap();
        let r = preprocess_ct_slice(&s.image, &cfg, seed).unwrap();
        fov_ok &= r.fov.has_fov && r.fov.k == 3;
        let chest = r.chest.filled.foreground();
        let frac = |truth: &[bool], keep: bool| {
            let n = truth.iter().filter(|&&t| t).count() as f64;
            let hit = truth
                .iter()
                .zip(&chest)
                .zip(r.cleaned.data().iter().zip(s.image.data()))
                .filter(|((&t, &m), (&cl, &orig))| t && if keep { m && cl == orig } else { cl == 0.0 })
                .count() as f64;
            hit / n
        };
        worst_ring = worst_ring.min(frac(&s.ring, false));
        worst_body = worst_body.min(frac(&s.body, true));
    }
    c.check(fov_ok, "detect_fov gives (true, 3) on three slices");
    c.check(
        worst_ring >= 0.99,
        format!("ring pixels zeroed {:.2}% (≥ 99%)", 100.0 * worst_ring),
    );
    c.check(
        worst_body >= 0.99,
        format!("body pixels kept {:.2}% (≥ 99%)", 100.0 * worst_body),
    );
    let flat = ScalarVolume::image(64, 64, vec![0.37; 64 * 64]).unwrap();
    c.check(
        clahe(&flat, &cfg).unwrap() == flat,
        "CLAHE leaves a constant image unchanged",
    );
    c.done()
}

// ---------------------------------------------------------------- 5

fn otsu_oracle(values: &[f64]) -> usize {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let q: Vec<usize> = values
        .iter()
        .map(|v| ((v - lo) / (hi - lo) * 255.0).round() as usize)
        .collect();
    let n = q.len() as f64;
    let (mut best, mut best_t) = (-1.0f64, 0);
    for t in 0..255 {
        let (lo_n, hi_n) = (
            q.iter().filter(|&&v| v <= t).count() as f64,
            q.iter().filter(|&&v| v > t).count() as f64,
        );
        if lo_n == 0.0 || hi_n == 0.0 {
            continue;
        }
        let m0 = q.iter().filter(|&&v| v <= t).map(|&v| v as f64).sum::<f64>() / lo_n;
        let m1 = q.iter().filter(|&&v| v > t).map(|&v| v as f64).sum::<f64>() / hi_n;
        let between = (lo_n / n) * (hi_n / n) * (m0 - m1).powi(2);
        if between > best + 1e-12 * best.abs().max(1.0) {
            best = between;
            best_t = t;
        }
    }
    best_t
}

fn glcm_pairs(q: &[usize], w: usize, off: (isize, isize), levels: usize) -> Vec<f64> {
    let mut m = vec![0.0; levels * levels];
    for a in 0..q.len() {
        for b in 0..q.len() {
            let d = ((b % w) as isize - (a % w) as isize, (b / w) as isize - (a / w) as isize);
            if d == off {
                m[q[a] * levels + q[b]] += 1.0;
                m[q[b] * levels + q[a]] += 1.0;
            }
        }
    }
    m
}

fn glcm_props(counts: &[f64], levels: usize) -> [f64; 4] {
    let total: f64 = counts.iter().sum();
    let idx = || (0..levels).flat_map(|i| (0..levels).map(move |j| (i, j)));
    let p = |i: usize, j: usize| counts[i * levels + j] / total;
    let mu_i: f64 = idx().map(|(i, j)| i as f64 * p(i, j)).sum();
    let mu_j: f64 = idx().map(|(i, j)| j as f64 * p(i, j)).sum();
    let var_i: f64 = idx().map(|(i, j)| (i as f64 - mu_i).powi(2) * p(i, j)).sum();
    let var_j: f64 = idx().map(|(i, j)| (j as f64 - mu_j).powi(2) * p(i, j)).sum();
    let cov: f64 = idx()
        .map(|(i, j)| (i as f64 - mu_i) * (j as f64 - mu_j) * p(i, j))
        .sum();
    [
        idx().map(|(i, j)| p(i, j) * (i as f64 - j as f64).powi(2)).sum(),
        idx()
            .map(|(i, j)| p(i, j) / (1.0 + (i as f64 - j as f64).powi(2)))
            .sum(),
        idx().map(|(i, j)| p(i, j).powi(2)).sum(),
        if var_i > 0.0 && var_j > 0.0 {
            cov / (var_i * var_j).sqrt()
        } else {
            0.0
        },
    ]
}

fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut credit, mut pairs) = (0.0, 0.0);
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                pairs += 1.0;
                credit += if scores[i] > scores[j] {
                    1.0
                } else if scores[i] == scores[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    credit / pairs
}

/// Hessian-norm energy from direct central differences of the displacement.
fn bending_oracle(t: &BsplineTransform, grid: &Geometry) -> f64 {
    let axes: Vec<usize> = (0..3).filter(|&a| grid.dims[a] > 1).collect();
    let h = grid.spacing;
    let at = |p: [f64; 3], steps: &[(usize, f64)]| {
        let mut q = p;
        for &(a, s) in steps {
            q[a] += s * h[a];
        }
        t.displacement(q)
    };
    let mut total = 0.0;
    for idx in 0..grid.len() {
        let c = grid.coords(idx);
        let p = grid.to_physical([c[0] as f64, c[1] as f64, c[2] as f64]);
        for &a in &axes {
            for &b in &axes {
                let d: Vec<f64> = if a == b {
                    let (u1, u0, um) = (at(p, &[(a, 1.0)]), at(p, &[]), at(p, &[(a, -1.0)]));
                    (0..3).map(|k| (u1[k] - 2.0 * u0[k] + um[k]) / (h[a] * h[a])).collect()
                } else {
                    let pp = at(p, &[(a, 1.0), (b, 1.0)]);
                    let pm = at(p, &[(a, 1.0), (b, -1.0)]);
                    let mp = at(p, &[(a, -1.0), (b, 1.0)]);
                    let mm = at(p, &[(a, -1.0), (b, -1.0)]);
                    (0..3)
                        .map(|k| (pp[k] - pm[k] - mp[k] + mm[k]) / (4.0 * h[a] * h[b]))
                        .collect()
                };
                total += d.iter().map(|v| v * v).sum::<f64>();
            }
        }
    }
    total / grid.len() as f64
}

fn oracles() -> Outcome {
    let mut c = Checks::default();
    let mut rng = SplitMix64::new(2024);

    let mut otsu_ok = 0;
    for _ in 0..30 {
        let vals: Vec<f64> = (0..400)
            .map(|i| {
                if i % 3 == 0 {
                    rng.normal() * 5.0 + 40.0
                } else {
                    rng.normal() * 9.0 + 120.0
                }
            })
            .collect();
        let img = ScalarVolume::image(20, 20, vals.clone()).unwrap();
        otsu_ok += usize::from(otsu_threshold(&img).unwrap().level == otsu_oracle(&vals));
    }
    c.check(otsu_ok == 30, format!("Otsu vs 256-threshold scan: {otsu_ok}/30 equal"));

    let cfg = GlcmConfig {
        levels: 8,
        distances: vec![1, 2, 3],
        normalized: true,
        ..Default::default()
    };
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let img = ScalarVolume::image(8, 8, (0..64).map(|_| rng.below(256) as f64).collect()).unwrap();
        let mask = vec![true; 64];
        let q = quantize(&img, &mask, cfg.levels);
        let feats = glcm_features(&img, &mask, &cfg).unwrap();
        let mut k = 0;
        for &d in &cfg.distances {
            for &a in &cfg.angles {
                let counts = glcm_pairs(&q, 8, glcm_offset(d, a), cfg.levels);
                for v in glcm_props(&counts, cfg.levels) {
                    worst = worst.max((v - feats[k]).abs());
                    k += 1;
                }
            }
        }
    }
    c.check(
        worst <= 1e-9,
        format!("GLCM vs pair counting, 50 random 8×8: max |Δ| {worst:.1e}"),
    );

    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = 5 + rng.below(60);
        let scores: Vec<f64> = (0..n).map(|_| rng.below(10) as f64).collect();
        let mut labels: Vec<bool> = (0..n).map(|_| rng.next_f64() < 0.4).collect();
        labels[0] = true;
        labels[1] = false;
        worst = worst.max((roc_auc(&scores, &labels).unwrap().0 - pairwise_auc(&scores, &labels)).abs());
    }
    c.check(worst <= 1e-9, format!("AUC vs pairwise ranks: max |Δ| {worst:.1e}"));

    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let k = 2 + rng.below(3);
        let counts: Vec<Vec<u64>> = (0..k)
            .map(|_| (0..k).map(|_| 1 + rng.below(20) as u64).collect())
            .collect();
        let cm = ConfusionMatrix::new(counts.clone()).unwrap();
        let r = classification_report(&cm).unwrap();
        let n: f64 = counts.iter().flatten().map(|&v| v as f64).sum();
        let row = |i: usize| counts[i].iter().map(|&v| v as f64).sum::<f64>();
        let col = |j: usize| (0..k).map(|i| counts[i][j] as f64).sum::<f64>();
        let po = (0..k).map(|i| counts[i][i] as f64).sum::<f64>() / n;
        let pe = (0..k).map(|i| row(i) * col(i)).sum::<f64>() / (n * n);
        let kappa = (po - pe) / (1.0 - pe);
        let recall: Vec<f64> = (0..k).map(|i| counts[i][i] as f64 / row(i)).collect();
        let precision: Vec<f64> = (0..k).map(|i| counts[i][i] as f64 / col(i)).collect();
        let f1: Vec<f64> = (0..k)
            .map(|i| 2.0 * precision[i] * recall[i] / (precision[i] + recall[i]))
            .collect();
        worst = worst
            .max((cohen_kappa(&cm).unwrap() - kappa).abs())
            .max((r.kappa - kappa).abs())
            .max((r.macro_f1 - mean(&f1)).abs())
            .max((r.balanced_accuracy - mean(&recall)).abs());
    }
    c.check(
        worst <= 1e-9,
        format!("Kappa/F1/BACC vs formulas, 100 matrices: max |Δ| {worst:.1e}"),
    );

    let mut worst: f64 = 0.0;
    for trial in 0..5 {
        let t = BsplineTransform {
            grid_dims: [6, 6, if trial % 2 == 0 { 6 } else { 1 }],
            grid_spacing: [4.0, 4.0, 4.0],
            grid_origin: [-6.0, -6.0, if trial % 2 == 0 { -6.0 } else { 0.0 }],
            coefficients: (0..if trial % 2 == 0 { 216 } else { 36 })
                .map(|_| [rng.normal(), rng.normal(), rng.normal()])
                .collect(),
        };
        let dims = if trial % 2 == 0 { [7, 6, 5] } else { [9, 8, 1] };
        let grid = Geometry::new(dims, [1.5, 1.25, 1.0], [0.0, 0.0, 0.0]).unwrap();
        let (a, b) = (bending_energy(&t, &grid), bending_oracle(&t, &grid));
        worst = worst.max((a - b).abs() / b.abs().max(1e-12));
    }
    c.check(
        worst <= 1e-9,
        format!("bending energy vs stencils: max rel |Δ| {worst:.1e}"),
    );
    c.done()
}

// ---------------------------------------------------------------- 6

fn blobs(counts: &[usize], d: usize, spread: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = SplitMix64::new(seed);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (c, &n) in counts.iter().enumerate() {
        for _ in 0..n {
            x.push(
                (0..d)
                    .map(|j| if j % counts.len() == c { 3.0 } else { 0.0 } + spread * rng.normal())
                    .collect(),
            );
            y.push(c);
        }
    }
    (x, y)
}

fn numerical_checks() -> Outcome {
    let mut c = Checks::default();
    let (x, y) = blobs(&[6, 5, 4], 4, 1.0, 5);
    let w: Vec<f64> = y.iter().map(|&k| [1.0, 1.7, 0.6][k]).collect();
    let p = MlpParams::init(4, 6, 3, 8);
    let (_, grad) = mlp_loss_grad(&p, &x, &y, &w, 0.01);
    let theta = p.flatten();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for k in 0..theta.len() {
        let eval = |delta: f64| {
            let mut q = p.clone();
            let mut t = theta.clone();
            t[k] += delta;
            q.set_flat(&t);
            mlp_loss(&q, &x, &y, &w, 0.01)
        };
        let fd = (eval(h) - eval(-h)) / (2.0 * h);
        worst = worst.max((grad[k] - fd).abs() / grad[k].abs().max(fd.abs()).max(1e-6));
    }
    c.check(
        worst < 1e-4,
        format!("MLP gradient vs central differences: max rel err {worst:.1e}"),
    );

    let mut rng = SplitMix64::new(6);
    let (mut ortho, mut sorted) = (0.0f64, true);
    for _ in 0..10 {
        let (n, d) = (10 + rng.below(30), 2 + rng.below(12));
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|j| rng.normal() * (j + 1) as f64).collect())
            .collect();
        let m = pca_fit(&x, d.min(n - 1)).unwrap();
        for a in &m.components {
            for b in &m.components {
                let dot: f64 = a.iter().zip(b).map(|(p, q)| p * q).sum();
                let want = if std::ptr::eq(a, b) { 1.0 } else { 0.0 };
                ortho = ortho.max((dot - want).abs());
            }
        }
        sorted &= m.explained_variance.windows(2).all(|w| w[1] <= w[0]);
    }
    c.check(
        ortho <= 1e-8 && sorted,
        format!("PCA orthonormality {ortho:.1e}, variance sorted: {sorted}"),
    );

    let v = gen_brain_phantom(&BrainPhantomConfig {
        dims: [32, 32, 32],
        ..Default::default()
    })
    .unwrap()
    .intensity;
    let self_mi = mutual_information(v.data(), v.data(), 32).unwrap();
    let mut mi_ok = true;
    for d in [[1.0, 0.0, 0.0], [2.0, -1.0, 0.0], [0.0, 3.0, 1.0], [-4.0, 2.0, 2.0]] {
        let chain = TransformChain::from_stages(vec![Stage::Affine(AffineTransform::translation(d))]);
        let s = resample(&v, &chain, v.geometry(), Interpolation::Linear).unwrap();
        mi_ok &= self_mi >= mutual_information(v.data(), s.data(), 32).unwrap();
    }
    c.check(mi_ok, format!("MI(v,v) = {self_mi:.3} dominates four shifts"));

    let (x, y) = blobs(&[12, 9, 6], 5, 1.2, 7);
    let specs = [
        ClassifierSpec::Knn { k: 3 },
        ClassifierSpec::Mlp(MlpSpec {
            hidden: 8,
            epochs: 60,
            ..Default::default()
        }),
        ClassifierSpec::Forest(ForestSpec {
            trees: 15,
            ..Default::default()
        }),
        ClassifierSpec::Ensemble {
            members: vec![
                ClassifierSpec::Knn { k: 3 },
                ClassifierSpec::Forest(ForestSpec::default()),
            ],
        },
    ];
    let mut worst: f64 = 0.0;
    let (probe, _) = blobs(&[10, 10, 10], 5, 3.0, 70);
    for s in &specs {
        let m = train(s, &x, &y, 3).unwrap();
        for row in predict_proba(&m, &probe).unwrap() {
            worst = worst.max((row.iter().sum::<f64>() - 1.0).abs());
        }
    }
    c.check(
        worst <= 1e-9,
        format!("predict_proba rows sum to 1: max |Δ| {worst:.1e}"),
    );
    c.done()
}

// ---------------------------------------------------------------- 7

fn rotate90(mask: &[bool], w: usize, h: usize) -> (Vec<bool>, usize) {
    let mut out = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            // (x, y) -> (h - 1 - y, x) in an h-wide image
            out[x * h + (h - 1 - y)] = mask[y * w + x];
        }
    }
    (out, h)
}

fn invariance() -> Outcome {
    let mut c = Checks::default();
    let mut rng = SplitMix64::new(12);
    let (w, h) = (40, 30);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let mut blob = vec![false; w * h];
        let (cx, cy) = (12.0 + rng.uniform(0.0, 4.0), 12.0 + rng.uniform(0.0, 4.0));
        let (a, b) = (rng.uniform(4.0, 8.0), rng.uniform(3.0, 6.0));
        for y in 0..h {
            for x in 0..w {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                blob[y * w + x] =
                    (dx / a).powi(2) + (dy / b).powi(2) <= 1.0 || (dx > 0.0 && dx < a + 3.0 && dy.abs() < 1.0);
            }
        }
        let base = log_hu_moments(&blob, w).unwrap();
        let mut moved = vec![false; w * h];
        for y in 0..h - 5 {
            for x in 0..w - 7 {
                moved[(y + 5) * w + x + 7] = blob[y * w + x];
            }
        }
        let (r90, w90) = rotate90(&blob, w, h);
        let r180: Vec<bool> = blob.iter().rev().copied().collect();
        for other in [
            log_hu_moments(&moved, w).unwrap(),
            log_hu_moments(&r90, w90).unwrap(),
            log_hu_moments(&r180, w).unwrap(),
        ] {
            for k in 0..7 {
                worst = worst.max((other[k] - base[k]).abs());
            }
        }
    }
    c.check(
        worst <= 1e-9,
        format!("log-Hu under translation and 90°/180° rotation: max |Δ| {worst:.1e}"),
    );

    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let a: Vec<f64> = (0..500).map(|_| rng.normal()).collect();
        let b: Vec<f64> = a.iter().map(|v| 0.6 * v + rng.normal()).collect();
        let (scale, shift) = (rng.uniform(0.01, 50.0), rng.uniform(-20.0, 20.0));
        let mapped: Vec<f64> = b.iter().map(|v| scale * v + shift).collect();
        let d = normalized_cross_correlation(&a, &b).unwrap() - normalized_cross_correlation(&a, &mapped).unwrap();
        worst = worst.max(d.abs());
    }
    c.check(
        worst <= 1e-9,
        format!("NCC under positive affine intensity maps: max |Δ| {worst:.1e}"),
    );

    let cfg = CtPreprocessConfig::default();
    let mut fov_ok = true;
    for seed in [1, 2] {
        let img = gen_lung_slice(&LungSliceConfig {
            seed,
            ..Default::default()
        })
        .unwrap()
        .image;
        let f0 = detect_fov(&img, &cfg).unwrap();
        for s in [0.001, 0.5, 3.0, 4096.0] {
            let f = detect_fov(&img.map(|v| v * s).unwrap(), &cfg).unwrap();
            fov_ok &= f.has_fov == f0.has_fov && f.k == f0.k;
        }
    }
    c.check(fov_ok, "detect_fov unchanged under intensity scaling by 0.001 to 4096");
    c.done()
}

// ---------------------------------------------------------------- 8

fn hard_lesions(seed: u64) -> LesionDatasetConfig {
    let knob = |hue, irregularity, texture_frequency| LesionClassKnobs {
        hue,
        irregularity,
        texture_frequency,
    };
    LesionDatasetConfig {
        classes: vec![knob(20.0, 0.10, 0.40), knob(40.0, 0.12, 0.45), knob(60.0, 0.14, 0.50)],
        counts: vec![120, 40, 10],
        size: 64,
        hue_jitter: 40.0,
        noise_sigma: 20.0,
        seed,
    }
}

fn smote_contract() -> Outcome {
    let mut c = Checks::default();
    let (x, y) = blobs(&[25, 7, 3], 4, 1.0, 31);
    let (xs, ys) = smote(&x, &y, 3, 5, 4).unwrap();
    let counts = class_counts(&ys, 3).unwrap();
    c.check(counts == vec![25, 25, 25], format!("post-SMOTE counts {counts:?}"));
    let mut worst: f64 = 0.0;
    for (s, &cls) in xs[x.len()..].iter().zip(&ys[x.len()..]) {
        let members: Vec<&Vec<f64>> = x.iter().zip(&y).filter(|(_, &l)| l == cls).map(|(r, _)| r).collect();
        let mut best = f64::INFINITY;
        for a in &members {
            for b in &members {
                let ab: Vec<f64> = a.iter().zip(b.iter()).map(|(p, q)| q - p).collect();
                let len2: f64 = ab.iter().map(|v| v * v).sum();
                if len2 == 0.0 {
                    continue;
                }
                let t = s
                    .iter()
                    .zip(a.iter())
                    .zip(&ab)
                    .map(|((p, q), v)| (p - q) * v)
                    .sum::<f64>()
                    / len2;
                if (0.0..=1.0).contains(&t) {
                    let r: f64 = (0..s.len())
                        .map(|j| (a[j] + t * ab[j] - s[j]).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    best = best.min(r);
                }
            }
        }
        worst = worst.max(best);
    }
    c.check(
        worst < 1e-9,
        format!("synthetic samples on same-class segments: max residual {worst:.1e}"),
    );

    let mut with = Vec::new();
    let mut without = Vec::new();
    for seed in [1, 2, 4] {
        let d = gen_lesion_dataset(&hard_lesions(seed)).unwrap();
        let labels: Vec<Option<usize>> = d.labels.iter().map(|&l| Some(l)).collect();
        let m = extract_batch(&d.images, &labels, &Default::default(), &Default::default()).unwrap();
        let bacc = |smote_k| {
            let cfg = PipelineConfig {
                smote_k,
                ..Default::default()
            };
            let cv = cross_validate(&cfg, &m.rows, &d.labels, 3, &SplitConfig::default()).unwrap();
            let cm = ConfusionMatrix::from_predictions(&cv.truth, &cv.predictions, 3).unwrap();
            classification_report(&cm).unwrap().balanced_accuracy
        };
        with.push(bacc(Some(5)));
        without.push(bacc(None));
    }
    c.check(
        mean(&with) > mean(&without),
        format!(
            "imbalanced lesions (120/40/10), MLP BACC with SMOTE {} (mean {:.3}) vs without {} (mean {:.3})",
            fmt3(&with),
            mean(&with),
            fmt3(&without),
            mean(&without)
        ),
    );
    c.done()
}

// ---------------------------------------------------------------- 9

fn end_to_end(work: &Path) -> Outcome {
    let start = Instant::now();
    let mut c = Checks::default();
    let mut run = LesionRun {
        models: vec![NamedModel {
            name: "MLP".into(),
            spec: ClassifierSpec::Mlp(MlpSpec::default()),
        }],
        balance: vec![Balance::Smote],
        one_vs_all: true,
        ..Default::default()
    };
    run.derive_seeds();
    let ctx = Ctx {
        out_dir: work.join("c9"),
        one_based: false,
    };
    let report = cmd_classify(&ctx, &run).unwrap();
    let grid = report.table("smote/metrics").unwrap();
    let acc: f64 = grid.cell("ACC", "MLP").unwrap().parse().unwrap();
    let kappa: f64 = grid.cell("Kappa", "MLP").unwrap().parse().unwrap();
    c.check(acc >= 0.90, format!("ACC {acc:.4} (≥ 0.90)"));
    c.check(kappa >= 0.80, format!("Kappa {kappa:.4} (≥ 0.80)"));
    let folds = report.table("smote/folds_mlp").unwrap();
    let rows: Vec<&str> = folds.rows.iter().map(|r| r[0].as_str()).collect();
    c.check(
        rows == ["Fold 1", "Fold 2", "Fold 3", "Fold 4", "Fold 5", "Average"],
        format!("fold table rows {rows:?}"),
    );
    let ova: Vec<&str> = report
        .tables
        .iter()
        .filter(|t| t.name.starts_with("smote/ova_"))
        .map(|t| t.title.as_str())
        .collect();
    c.check(ova.len() == 3, format!("one-vs-all reports: {ova:?}"));
    c.check(
        report.table("smote/metrics").unwrap().title.contains("(with SMOTE)"),
        "grid labelled (with SMOTE)",
    );
    let secs = start.elapsed().as_secs_f64();
    c.check(secs < 600.0, format!("runtime {secs:.0} s (< 600 s)"));
    c.done()
}

// ---------------------------------------------------------------- 10

fn tree_bytes(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism(work: &Path) -> Outcome {
    let mut c = Checks::default();
    let root = work.join("c10");
    let data = root.join("data");
    let write = |name: &str, text: &str| {
        let p = root.join(name);
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(&p, text).unwrap();
        p
    };
    let phantom = write(
        "phantom.json",
        r#"{"pipeline": "phantom", "seed": 3,
            "brain": {"phantom": {"dims": [24, 24, 24]}, "cases": 3},
            "lung": {"slice": {"size": 64, "vessels": 10}, "pair": {}, "cases": 1},
            "lesion": {"counts": [6, 5, 4], "size": 48}}"#,
    );
    let args = |jobs: &str, out: &Path, cfg: Option<&Path>, cmd: &[&str]| {
        let mut a: Vec<String> = vec!["medkit".into(), "--jobs".into(), jobs.into(), "--out-dir".into()];
        a.push(out.display().to_string());
        if let Some(p) = cfg {
            a.push("--config".into());
            a.push(p.display().to_string());
        }
        a.extend(cmd.iter().map(|s| s.to_string()));
        a
    };
    run_args(args("1", &data, Some(&phantom), &["phantom"])).unwrap();

    let brain = write(
        "data/brain/run.json",
        &fs::read_to_string(data.join("brain/brain.json"))
            .unwrap()
            .replacen('{', r#"{"segmentation": {"methods": ["tissue-model", "label-propagation", "posterior", "majority-voting", "mi-weighted"]},"#, 1),
    );
    let lung = write(
        "data/lung/run.json",
        &fs::read_to_string(data.join("lung/lung.json")).unwrap().replacen(
            '{',
            r#"{"presets": ["affine-mse", "bspline-ncc"],"#,
            1,
        ),
    );
    let lesion = write(
        "data/lesion/run.json",
        &fs::read_to_string(data.join("lesion/lesion.json")).unwrap().replacen(
            '{',
            r#"{"pca_components": 6, "smote_k": 2, "balance": ["smote", "augment", "class_weights"],
                "split": {"scheme": "stratified_kfold", "k": 3, "seed": 0},
                "models": [{"name": "kNN", "spec": {"kind": "knn", "k": 3}},
                           {"name": "MLP", "spec": {"kind": "mlp", "hidden": 8, "epochs": 40}},
                           {"name": "RF", "spec": {"kind": "forest", "trees": 10}}],"#,
            1,
        ),
    );

    let commands: Vec<(&str, Option<PathBuf>, Vec<String>)> = vec![
        ("phantom", Some(phantom.clone()), vec!["phantom".into()]),
        ("segment", Some(brain.clone()), vec!["segment".into()]),
        ("register", Some(lung.clone()), vec!["register".into()]),
        ("preprocess", Some(lung.clone()), vec!["preprocess".into()]),
        ("features", Some(lesion.clone()), vec!["features".into()]),
        ("classify", Some(lesion.clone()), vec!["classify".into()]),
    ];
    let mut same = Vec::new();
    let mut differ = Vec::new();
    let mut runs: BTreeMap<&str, PathBuf> = BTreeMap::new();
    let mut check = |name: &str, cfg: Option<&Path>, cmd: &[String], runs: &mut BTreeMap<&str, PathBuf>| {
        let cmd: Vec<&str> = cmd.iter().map(String::as_str).collect();
        let mut trees = Vec::new();
        for (k, jobs) in ["1", "1", "4"].iter().enumerate() {
            let out = root.join(format!("{name}_{k}"));
            run_args(args(jobs, &out, cfg, &cmd)).unwrap_or_else(|e| panic!("{name}: {e:#}"));
            trees.push(tree_bytes(&out));
        }
        if trees[0] == trees[1] && trees[0] == trees[2] && !trees[0].is_empty() {
            same.push(name.to_string());
        } else {
            differ.push(name.to_string());
        }
        runs.insert(
            match name {
                "segment" => "segment",
                "register" => "register",
                "classify" => "classify",
                _ => "other",
            },
            root.join(format!("{name}_0")),
        );
    };
    for (name, cfg, cmd) in &commands {
        check(name, cfg.as_deref(), cmd, &mut runs);
    }
    let seg = &runs["segment"];
    let reg = &runs["register"];
    let cls = &runs["classify"];
    let p = |x: &Path| x.display().to_string();
    let extra: Vec<(&str, Vec<String>)> = vec![
        (
            "evaluate-segmentation",
            vec![
                "evaluate".into(),
                "segmentation".into(),
                "--pred".into(),
                p(&seg.join("labels/case01__majority-voting.mhd")),
                "--truth".into(),
                p(&data.join("brain/case01/labels.mhd")),
            ],
        ),
        (
            "transform-points",
            vec![
                "transform-points".into(),
                "--transform".into(),
                p(&reg.join("transforms/case01__bspline-ncc.json")),
                "--points".into(),
                p(&data.join("lung/case01/fixed_landmarks.txt")),
            ],
        ),
        (
            "evaluate-tre",
            vec![
                "evaluate".into(),
                "tre".into(),
                "--pred".into(),
                p(&data.join("lung/case01/fixed_landmarks.txt")),
                "--truth".into(),
                p(&data.join("lung/case01/moving_landmarks.txt")),
            ],
        ),
        (
            "evaluate-classification",
            vec![
                "evaluate".into(),
                "classification".into(),
                "--predictions".into(),
                p(&cls.join("smote/predictions.csv")),
            ],
        ),
    ];
    for (name, cmd) in &extra {
        check(name, None, cmd, &mut runs);
    }
    c.check(
        differ.is_empty(),
        format!(
            "identical bytes over 2 runs at --jobs 1 and 1 at --jobs 4: {}",
            same.join(", ")
        ),
    );
    if !differ.is_empty() {
        c.check(false, format!("differing: {}", differ.join(", ")));
    }
    c.done()
}

// ----------------------------------------------------------------

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let work = tmp.path();
    let mut population = None;
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut run = |n: usize, title: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(&mut *f)).unwrap_or_else(|e| Outcome {
            pass: false,
            detail: format!(
                "panicked: {}",
                e.downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default()
            ),
        });
        println!(
            "criterion {n:>2} {} {title} ({:.0} s): {}",
            if outcome.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            outcome.detail
        );
        results.push((n, title, outcome));
    };
    run(1, "multi-atlas fusion on a 5-member population", &mut || {
        population_fusion(&mut population)
    });
    run(
        2,
        "multi-atlas fusion vs tissue model on the phantom suite",
        &mut || suite_ordering(population.as_ref()),
    );
    run(3, "registration recovery", &mut || registration_recovery(work));
    run(4, "CT preprocessing", &mut ct_preprocessing);
    run(5, "oracle equivalence", &mut oracles);
    run(6, "numerical checks", &mut numerical_checks);
    run(7, "invariance suite", &mut invariance);
    run(8, "SMOTE contract", &mut smote_contract);
    run(9, "end-to-end lesion classification", &mut || end_to_end(work));
    run(10, "determinism", &mut || determinism(work));
    let passed = results.iter().filter(|r| r.2.pass).count();
    let failed: Vec<String> = results.iter().filter(|r| !r.2.pass).map(|r| r.0.to_string()).collect();
    println!(
        "acceptance: {passed}/{} criteria pass{}",
        results.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failing: {}", failed.join(", "))
        }
    );
    if !failed.is_empty() && std::env::var("MEDKIT_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
