use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::json;

use medkit::io::{read_labels, read_landmarks, write_landmarks};
use medkit::metrics::{classification_report, roc_auc, score_segmentation, tre, ConfusionMatrix};
use medkit::registration::{transform_landmarks, TransformChain};

use super::Ctx;
use crate::report::{fmt, fmt_opt, prepare, Report, Table};

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

pub fn cmd_evaluate_segmentation(ctx: &Ctx, pred: &Path, truth: &Path, absolute_avd: bool) -> Result<Report> {
    let args = json!({"pred": path_str(pred), "truth": path_str(truth), "absolute_avd": absolute_avd});
    let mut report = Report::new("Segmentation overlap", "evaluate segmentation", 0, &args)?;
    let p = read_labels(pred).with_context(|| format!("reading {}", pred.display()))?;
    let t = read_labels(truth).with_context(|| format!("reading {}", truth.display()))?;
    let s = score_segmentation(&p, &t, absolute_avd)?;
    let mut table = Table::new("segmentation", "Per-class scores", &["class", "dsc", "hd_mm", "avd"]);
    for c in &s.classes {
        table.push(vec![
            c.name.clone(),
            fmt(c.dice),
            fmt_opt(c.hausdorff_mm),
            fmt_opt(c.avd),
        ]);
    }
    table.push(vec!["AVERAGE".into(), fmt(s.mean_dice()), "".into(), "".into()]);
    report.tables.push(table);
    report.write(&ctx.out_dir)?;
    Ok(report)
}

pub fn cmd_evaluate_tre(ctx: &Ctx, pred: &Path, truth: &Path, spacing: [f64; 3]) -> Result<Report> {
    let args =
        json!({"pred": path_str(pred), "truth": path_str(truth), "spacing": spacing, "one_based": ctx.one_based});
    let mut report = Report::new("Target registration error", "evaluate tre", 0, &args)?;
    let p = read_landmarks(pred, spacing, ctx.one_based)?;
    let t = read_landmarks(truth, spacing, ctx.one_based)?;
    let s = tre(&p, &t, spacing)?;
    let mut table = Table::new("tre", "TRE (mm)", &["points", "mean_mm", "std_mm", "max_mm", "summary"]);
    table.push(vec![
        s.per_point.len().to_string(),
        fmt(s.mean),
        fmt(s.std),
        fmt(s.per_point.iter().cloned().fold(0.0, f64::max)),
        s.display(),
    ]);
    let mut points = Table::new("tre_points", "Per-landmark error", &["point", "error_mm"]);
    for (i, d) in s.per_point.iter().enumerate() {
        points.push(vec![(i + 1).to_string(), fmt(*d)]);
    }
    report.tables.push(table);
    report.tables.push(points);
    report.write(&ctx.out_dir)?;
    Ok(report)
}

/// Scores a predictions CSV. Every `<prefix>predicted` column is one model;
/// its `<prefix>p_*` columns, when present, give class probabilities.
pub fn cmd_evaluate_classification(ctx: &Ctx, predictions: &Path) -> Result<Report> {
    let args = json!({"predictions": path_str(predictions)});
    let mut report = Report::new("Classification metrics", "evaluate classification", 0, &args)?;
    let mut r = csv::Reader::from_path(predictions).with_context(|| format!("reading {}", predictions.display()))?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let records: Vec<csv::StringRecord> = r.records().collect::<std::result::Result<_, _>>()?;
    let col = |name: &str| header.iter().position(|h| h == name);
    let truth_col = col("truth").context("predictions CSV needs a truth column")?;
    let parse = |rec: &csv::StringRecord, c: usize| -> Result<usize> {
        rec[c]
            .trim()
            .parse()
            .with_context(|| format!("bad class index {:?}", &rec[c]))
    };
    let truth: Vec<usize> = records.iter().map(|r| parse(r, truth_col)).collect::<Result<_>>()?;
    let models: Vec<(String, usize)> = header
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.strip_suffix("predicted").map(|p| (p.to_string(), i)))
        .collect();
    if models.is_empty() {
        bail!("predictions CSV has no predicted column");
    }
    let prob_cols: Vec<Vec<usize>> = models
        .iter()
        .map(|(p, _)| {
            let prefix = format!("{p}p_");
            (0..header.len()).filter(|&i| header[i].starts_with(&prefix)).collect()
        })
        .collect();
    let mut classes = truth.iter().copied().max().map_or(0, |m| m + 1);
    for (_, c) in &models {
        for rec in &records {
            classes = classes.max(parse(rec, *c)? + 1);
        }
    }
    let names: Vec<String> = models
        .iter()
        .map(|(p, _)| p.trim_end_matches(':').to_string())
        .map(|p| if p.is_empty() { "model".into() } else { p })
        .collect();
    let mut cols = vec!["metric".to_string()];
    cols.extend(names.iter().cloned());
    let refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut table = Table::new("metrics", "Metrics", &refs);
    let mut rows: Vec<Vec<String>> = ["ACC", "PRC", "REC", "F1", "AUC", "BACC", "BMA", "Kappa"]
        .iter()
        .map(|m| vec![m.to_string()])
        .collect();
    for ((_, pc), probs) in models.iter().zip(&prob_cols) {
        let pred: Vec<usize> = records.iter().map(|r| parse(r, *pc)).collect::<Result<_>>()?;
        let rep = classification_report(&ConfusionMatrix::from_predictions(&truth, &pred, classes)?)?;
        let auc = if probs.len() == classes {
            let mut aucs = Vec::new();
            for (c, &pcol) in probs.iter().enumerate() {
                let scores: Vec<f64> = records
                    .iter()
                    .map(|r| {
                        r[pcol]
                            .trim()
                            .parse::<f64>()
                            .with_context(|| format!("bad probability {:?}", &r[pcol]))
                    })
                    .collect::<Result<_>>()?;
                let labels: Vec<bool> = truth.iter().map(|&t| t == c).collect();
                if let Ok((a, _)) = roc_auc(&scores, &labels) {
                    aucs.push(a);
                }
            }
            (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64)
        } else {
            None
        };
        let vals = [
            Some(rep.accuracy),
            Some(rep.macro_precision),
            Some(rep.macro_recall),
            Some(rep.macro_f1),
            auc,
            Some(rep.balanced_accuracy),
            Some(rep.bma),
            Some(rep.kappa),
        ];
        for (row, v) in rows.iter_mut().zip(vals) {
            row.push(fmt_opt(v));
        }
    }
    for row in rows {
        table.push(row);
    }
    report.tables.push(table);
    report.write(&ctx.out_dir)?;
    Ok(report)
}

/// Maps fixed-space landmarks through a saved transform chain.
pub fn cmd_transform_points(
    ctx: &Ctx,
    transform: &Path,
    points: &Path,
    spacing: [f64; 3],
    out: &str,
) -> Result<Report> {
    let args = json!({"transform": path_str(transform), "points": path_str(points), "spacing": spacing, "out": out});
    let mut report = Report::new("Transformed landmarks", "transform-points", 0, &args)?;
    let text = std::fs::read_to_string(transform).with_context(|| format!("reading {}", transform.display()))?;
    let chain: TransformChain = serde_json::from_str(&text).context("transform file is not a transform chain")?;
    let lms = read_landmarks(points, spacing, ctx.one_based)?;
    let moved = transform_landmarks(&chain, &lms);
    write_landmarks(&moved, prepare(&ctx.out_dir, out)?)?;
    report.outputs.push(out.into());
    let mut t = Table::new("points", "Landmark displacement", &["points", "mean_shift_mm"]);
    let shift = tre(&moved, &lms, spacing)?;
    t.push(vec![lms.len().to_string(), fmt(shift.mean)]);
    report.tables.push(t);
    report.write(&ctx.out_dir)?;
    Ok(report)
}
