use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use medkit::io::{read_landmarks, read_volume, write_volume};
use medkit::metrics::{format_mean_std, tre};
use medkit::phantom::{gen_lung_slice, gen_registration_pair};
use medkit::preprocess::{preprocess_ct_slice, preprocess_ct_volume, CtPreprocessConfig};
use medkit::registration::{register, transform_landmarks, PresetLibrary};
use medkit::rng::SplitMix64;
use medkit::{LandmarkSet, ScalarVolume};

use super::{mean_std, Ctx};
use crate::config::{LungPhantom, LungRun, LungSource, RunConfig};
use crate::report::{fmt, prepare, write_text, Failure, Report, Table};

pub(crate) struct LungCase {
    pub id: String,
    pub fixed: ScalarVolume,
    pub moving: ScalarVolume,
    pub fixed_landmarks: LandmarkSet,
    pub moving_landmarks: LandmarkSet,
}

pub(crate) fn load_cases(ctx: &Ctx, run: &LungRun) -> Result<Vec<LungCase>> {
    match &run.source {
        LungSource::Phantom { slice, pair, cases } => {
            let p = LungPhantom {
                slice: slice.clone(),
                pair: pair.clone(),
                cases: *cases,
            };
            (0..*cases)
                .map(|i| {
                    let s = gen_lung_slice(&p.slice_for(i))?;
                    let r = gen_registration_pair(&s.image, pair)?;
                    Ok(LungCase {
                        id: format!("case{:02}", i + 1),
                        fixed: r.fixed,
                        moving: r.moving,
                        fixed_landmarks: r.fixed_landmarks,
                        moving_landmarks: r.moving_landmarks,
                    })
                })
                .collect()
        }
        LungSource::Files(files) => files
            .iter()
            .map(|f| {
                let load = || -> Result<LungCase> {
                    let fixed = read_volume(&f.fixed)?;
                    let moving = read_volume(&f.moving)?;
                    let fs = fixed.geometry().spacing;
                    let ms = moving.geometry().spacing;
                    Ok(LungCase {
                        id: f.id.clone(),
                        fixed_landmarks: read_landmarks(&f.fixed_landmarks, fs, ctx.one_based)?,
                        moving_landmarks: read_landmarks(&f.moving_landmarks, ms, ctx.one_based)?,
                        fixed,
                        moving,
                    })
                };
                load().with_context(|| format!("case {}", f.id))
            })
            .collect(),
    }
}

fn enhance(img: &ScalarVolume, cfg: &CtPreprocessConfig, seed: u64) -> medkit::Result<ScalarVolume> {
    if img.dims()[2] == 1 {
        Ok(preprocess_ct_slice(img, cfg, seed)?.enhanced)
    } else {
        preprocess_ct_volume(img, cfg, seed)
    }
}

/// Registers every case with every preset and tabulates landmark error.
pub fn cmd_register(ctx: &Ctx, run: &LungRun) -> Result<Report> {
    let cfg = RunConfig::Lung(run.clone());
    let mut report = Report::new("Lung CT registration: TRE (mm)", "register", run.seed, &cfg)?;
    let cases = load_cases(ctx, run)?;
    if cases.is_empty() {
        bail!("no cases");
    }
    let jobs: Vec<(usize, usize)> = (0..cases.len())
        .flat_map(|c| (0..run.presets.len()).map(move |p| (c, p)))
        .collect();

    let inputs: Vec<Result<(ScalarVolume, ScalarVolume), String>> = cases
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let seed = SplitMix64::derive(run.seed, i as u64).next_u64();
            match &run.preprocess {
                None => Ok((c.fixed.clone(), c.moving.clone())),
                Some(p) => Ok((
                    enhance(&c.fixed, p, seed).map_err(|e| e.to_string())?,
                    enhance(&c.moving, p, seed).map_err(|e| e.to_string())?,
                )),
            }
        })
        .collect();

    let outcomes: Vec<Result<(LandmarkSet, medkit::registration::Registration), String>> = jobs
        .par_iter()
        .map(|&(c, p)| {
            let (fixed, moving) = inputs[c].as_ref().map_err(|e| format!("preprocessing: {e}"))?;
            let maps = PresetLibrary::get(&run.presets[p], fixed.geometry()).map_err(|e| e.to_string())?;
            let seed = SplitMix64::derive(run.seed, c as u64).next_u64();
            let reg = register(fixed, moving, &maps, seed).map_err(|e| e.to_string())?;
            Ok((transform_landmarks(&reg.chain, &cases[c].fixed_landmarks), reg))
        })
        .collect();

    let mut columns: Vec<String> = vec!["method".into()];
    columns.extend(cases.iter().map(|c| c.id.clone()));
    columns.push("Average".into());
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut table = Table::new("tre", "TRE mean ± std (mm)", &cols);
    let mut detail = Table::new(
        "tre_detail",
        "Per case and method",
        &["case", "method", "mean_mm", "std_mm", "max_mm", "final_cost"],
    );

    let spacing = |c: &LungCase| c.moving_landmarks.spacing;
    let mut row = vec!["before".to_string()];
    let mut pooled = Vec::new();
    for c in &cases {
        let t = tre(&c.fixed_landmarks, &c.moving_landmarks, spacing(c))?;
        row.push(t.display());
        detail.push(vec![
            c.id.clone(),
            "before".into(),
            fmt(t.mean),
            fmt(t.std),
            fmt(t.per_point.iter().cloned().fold(0.0, f64::max)),
            "".into(),
        ]);
        pooled.extend(t.per_point);
    }
    let (m, s) = mean_std(&pooled);
    row.push(format_mean_std(m, s));
    table.push(row);

    let mut failures = Vec::new();
    for (p, preset) in run.presets.iter().enumerate() {
        let mut row = vec![preset.clone()];
        let mut pooled = Vec::new();
        for (c, case) in cases.iter().enumerate() {
            match &outcomes[c * run.presets.len() + p] {
                Ok((pred, reg)) => {
                    let t = tre(pred, &case.moving_landmarks, spacing(case))?;
                    row.push(t.display());
                    let cost = reg
                        .per_stage_costs
                        .last()
                        .and_then(|s| s.levels.last())
                        .map(|l| fmt(l.final_cost))
                        .unwrap_or_default();
                    detail.push(vec![
                        case.id.clone(),
                        preset.clone(),
                        fmt(t.mean),
                        fmt(t.std),
                        fmt(t.per_point.iter().cloned().fold(0.0, f64::max)),
                        cost,
                    ]);
                    pooled.extend(t.per_point);
                    let rel = format!("transforms/{}__{}.json", case.id, preset);
                    write_text(
                        &prepare(&ctx.out_dir, &rel)?,
                        &serde_json::to_string_pretty(&reg.chain)?,
                    )?;
                    report.outputs.push(rel);
                }
                Err(e) => {
                    row.push("failed".into());
                    failures.push(Failure {
                        case: format!("{}/{}", case.id, preset),
                        error: e.clone(),
                    });
                }
            }
        }
        if pooled.is_empty() {
            row.push("n/a".into());
        } else {
            let (m, s) = mean_std(&pooled);
            row.push(format_mean_std(m, s));
        }
        table.push(row);
    }
    if failures.len() == outcomes.len() {
        bail!("every registration failed: {}", failures[0].error);
    }
    report.tables.push(table);
    report.tables.push(detail);
    report.failures = failures;
    report.write(&ctx.out_dir)?;
    Ok(report)
}

/// CT artifact removal and contrast enhancement of every image in a lung run.
pub fn cmd_preprocess(ctx: &Ctx, run: &LungRun) -> Result<Report> {
    let cfg = RunConfig::Lung(run.clone());
    let mut report = Report::new("CT preprocessing", "preprocess", run.seed, &cfg)?;
    let pre = run.preprocess.clone().unwrap_or_default();
    pre.validate()?;
    let cases = load_cases(ctx, run)?;
    let mut table = Table::new(
        "fov",
        "Field-of-view detection",
        &[
            "case",
            "image",
            "has_fov",
            "clusters",
            "corner_tl",
            "corner_tr",
            "corner_bl",
            "corner_br",
            "chest_fraction",
        ],
    );
    let images: Vec<(String, &str, &ScalarVolume)> = cases
        .iter()
        .flat_map(|c| [(c.id.clone(), "fixed", &c.fixed), (c.id.clone(), "moving", &c.moving)])
        .collect();
    let outputs: Vec<Result<Vec<(usize, medkit::preprocess::CtSliceResult)>, String>> = images
        .par_iter()
        .enumerate()
        .map(|(i, (_, _, img))| {
            let seed = SplitMix64::derive(run.seed, i as u64).next_u64();
            (0..img.dims()[2])
                .map(|z| {
                    let s = SplitMix64::derive(seed, z as u64).next_u64();
                    preprocess_ct_slice(&img.slice(z), &pre, s)
                        .map(|r| (z, r))
                        .map_err(|e| e.to_string())
                })
                .collect()
        })
        .collect();
    let mut failures = Vec::new();
    for ((id, which, img), out) in images.iter().zip(outputs) {
        let slices = match out {
            Ok(s) => s,
            Err(e) => {
                failures.push(Failure {
                    case: format!("{id}/{which}"),
                    error: e,
                });
                continue;
            }
        };
        let g = *img.geometry();
        let mut cleaned = Vec::with_capacity(g.len());
        let mut enhanced = Vec::with_capacity(g.len());
        for (z, r) in &slices {
            cleaned.extend_from_slice(r.cleaned.data());
            enhanced.extend_from_slice(r.enhanced.data());
            let chest =
                r.chest.filled.foreground().iter().filter(|&&v| v).count() as f64 / r.chest.filled.data().len() as f64;
            let label = if slices.len() > 1 {
                format!("{which}[{z}]")
            } else {
                which.to_string()
            };
            let mut row = vec![id.clone(), label, r.fov.has_fov.to_string(), r.fov.k.to_string()];
            row.extend(r.fov.corner_means.iter().map(|&v| fmt(v)));
            row.push(fmt(chest));
            table.push(row);
        }
        for (name, data) in [("cleaned", cleaned), ("enhanced", enhanced)] {
            let rel = format!("{id}/{which}_{name}.mhd");
            write_volume(&ScalarVolume::new(g, data)?, prepare(&ctx.out_dir, &rel)?)?;
            report.outputs.push(rel);
        }
    }
    report.tables.push(table);
    report.failures = failures;
    report.write(&ctx.out_dir)?;
    Ok(report)
}
