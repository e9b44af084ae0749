use std::collections::BTreeMap;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use medkit::atlas::{prepare_case, segment_case, BrainCase, PreparedCase, SegmentationMethod};
use medkit::io::{read_labels, read_volume, write_labels};
use medkit::metrics::{score_segmentation, SegScore};
use medkit::phantom::gen_brain_suite;

use super::{pm, Ctx};
use crate::config::{BrainRun, BrainSource, RunConfig};
use crate::report::{fmt, fmt_opt, Failure, Report, Table};

fn load_cases(run: &BrainRun) -> Result<Vec<BrainCase>> {
    match &run.source {
        BrainSource::Phantom(cfg) => Ok(gen_brain_suite(cfg)?
            .into_iter()
            .enumerate()
            .map(|(i, p)| BrainCase {
                id: format!("case{:02}", i + 1),
                intensity: p.intensity,
                labels: p.labels,
            })
            .collect()),
        BrainSource::Files(files) => files
            .iter()
            .map(|f| {
                Ok(BrainCase {
                    id: f.id.clone(),
                    intensity: read_volume(&f.intensity).with_context(|| format!("case {}", f.id))?,
                    labels: read_labels(&f.labels).with_context(|| format!("case {}", f.id))?,
                })
            })
            .collect(),
    }
}

/// Leave-one-out segmentation of every case with every configured method.
/// A case that fails is reported and skipped; the others still run.
pub fn cmd_segment(ctx: &Ctx, run: &BrainRun) -> Result<Report> {
    let cfg = RunConfig::Brain(run.clone());
    let mut report = Report::new("Brain tissue segmentation (leave-one-out)", "segment", run.seed, &cfg)?;
    let cases = load_cases(run)?;
    if cases.len() < 2 {
        bail!("leave-one-out needs at least two cases");
    }
    let seg = &run.segmentation;
    let prepared: Vec<Result<PreparedCase, String>> = cases
        .par_iter()
        .map(|c| prepare_case(c, seg).map_err(|e| e.to_string()))
        .collect();
    let mut failures: Vec<Failure> = Vec::new();
    let ready: Vec<&PreparedCase> = prepared
        .iter()
        .zip(&cases)
        .filter_map(|(p, c)| match p {
            Ok(p) => Some(p),
            Err(e) => {
                failures.push(Failure {
                    case: c.id.clone(),
                    error: e.clone(),
                });
                None
            }
        })
        .collect();
    if ready.len() < 2 {
        bail!("fewer than two cases could be prepared: {failures:?}");
    }

    let results: Vec<Result<(String, Vec<(SegmentationMethod, SegScore, medkit::LabelVolume)>), Failure>> = (0..ready
        .len())
        .into_par_iter()
        .map(|t| {
            let target = ready[t];
            let training: Vec<&PreparedCase> = ready
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != t)
                .map(|(_, c)| *c)
                .collect();
            let fail = |e: medkit::Error| Failure {
                case: target.id.clone(),
                error: e.to_string(),
            };
            let out = segment_case(target, &training, seg, run.seed).map_err(fail)?;
            let mut scored = Vec::new();
            for (m, labels) in out.outputs {
                let s = score_segmentation(&labels, &target.labels, run.absolute_avd).map_err(fail)?;
                scored.push((m, s, labels));
            }
            Ok((target.id.clone(), scored))
        })
        .collect();

    let mut per_case = Table::new(
        "per_case",
        "Per-case scores",
        &["case", "method", "class", "dsc", "hd_mm", "avd"],
    );
    // method -> class name -> (dsc, hd, avd) samples
    type Samples = (Vec<f64>, Vec<f64>, Vec<f64>);
    let mut pooled: BTreeMap<SegmentationMethod, BTreeMap<String, Samples>> = BTreeMap::new();
    for r in results {
        let (id, scored) = match r {
            Ok(v) => v,
            Err(f) => {
                log::warn!("case {} failed: {}", f.case, f.error);
                failures.push(f);
                continue;
            }
        };
        for (m, score, labels) in scored {
            if run.write_labels {
                let rel = format!("labels/{id}__{}.mhd", m.name());
                let path = crate::report::prepare(&ctx.out_dir, &rel)?;
                write_labels(&labels, path)?;
                report.outputs.push(rel);
            }
            let entry = pooled.entry(m).or_default();
            for c in &score.classes {
                per_case.push(vec![
                    id.clone(),
                    m.name().into(),
                    c.name.clone(),
                    fmt(c.dice),
                    fmt_opt(c.hausdorff_mm),
                    fmt_opt(c.avd),
                ]);
                let e = entry.entry(c.name.clone()).or_default();
                e.0.push(c.dice);
                e.1.extend(c.hausdorff_mm);
                e.2.extend(c.avd);
            }
            let mean = |f: fn(&medkit::metrics::ClassScore) -> Option<f64>| {
                let v: Vec<f64> = score.classes.iter().filter_map(f).collect();
                (v.len() == score.classes.len()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            };
            let (d, h, a) = (mean(|c| Some(c.dice)), mean(|c| c.hausdorff_mm), mean(|c| c.avd));
            per_case.push(vec![
                id.clone(),
                m.name().into(),
                "AVERAGE".into(),
                fmt_opt(d),
                fmt_opt(h),
                fmt_opt(a),
            ]);
            // "~" sorts the average after the tissue names.
            let e = entry.entry("~AVERAGE".into()).or_default();
            e.0.extend(d);
            e.1.extend(h);
            e.2.extend(a);
        }
    }
    if pooled.is_empty() {
        bail!("every case failed: {failures:?}");
    }

    let mut summary = Table::new(
        "summary",
        "Mean ± std over cases",
        &["method", "class", "dsc", "hd_mm", "avd"],
    );
    for m in &seg.methods {
        let Some(classes) = pooled.get(m) else { continue };
        for (class, (d, h, a)) in classes {
            let class = class.trim_start_matches('~');
            summary.push(vec![m.name().into(), class.into(), pm(d, 3), pm(h, 2), pm(a, 3)]);
        }
    }
    report.tables.push(summary);
    report.tables.push(per_case);
    failures.sort_by(|a, b| a.case.cmp(&b.case));
    report.failures = failures;
    report.write(&ctx.out_dir)?;
    Ok(report)
}
