use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use medkit::features::{augment, extract_batch, extract_with, lesion_mask, AugmentSpec, FeatureMatrix};
use medkit::io::read_color;
use medkit::metrics::{classification_report, roc_auc, roc_svg, ConfusionMatrix, RocPoint};
use medkit::ml::{cross_validate_with_extras, one_vs_all, split, CvResult, ExtraRow, PipelineConfig};
use medkit::phantom::gen_lesion_dataset;
use medkit::rng::SplitMix64;
use medkit::ColorImage;

use super::{slug, Ctx};
use crate::config::{Balance, LesionRun, LesionSource, RunConfig};
use crate::report::{fmt, fmt_opt, prepare, write_text, Report, Table};

pub(crate) struct LesionData {
    pub features: FeatureMatrix,
    pub images: Option<Vec<ColorImage>>,
    pub y: Vec<usize>,
    pub classes: usize,
}

pub(crate) fn load(run: &LesionRun) -> Result<LesionData> {
    let (features, images) = match &run.source {
        LesionSource::Phantom(cfg) => {
            let d = gen_lesion_dataset(cfg)?;
            let labels: Vec<Option<usize>> = d.labels.iter().map(|&l| Some(l)).collect();
            (extract_batch(&d.images, &labels, &run.glcm, &run.lbp)?, Some(d.images))
        }
        LesionSource::Images(entries) => {
            let images = entries
                .par_iter()
                .map(|e| read_color(&e.path).with_context(|| format!("reading {}", e.path.display())))
                .collect::<Result<Vec<_>>>()?;
            let labels: Vec<Option<usize>> = entries.iter().map(|e| Some(e.label)).collect();
            (extract_batch(&images, &labels, &run.glcm, &run.lbp)?, Some(images))
        }
        LesionSource::Features(path) => {
            let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
            (FeatureMatrix::read_csv(file)?, None)
        }
    };
    let y = features
        .labels
        .iter()
        .enumerate()
        .map(|(i, l)| l.with_context(|| format!("row {} has no label", i + 1)))
        .collect::<Result<Vec<usize>>>()?;
    let classes = match &run.class_names {
        Some(n) => n.len(),
        None => y.iter().max().map_or(0, |m| m + 1),
    };
    if let Some(bad) = y.iter().find(|&&l| l >= classes) {
        bail!("label {bad} outside the {classes} named classes");
    }
    for c in 0..classes {
        if !y.contains(&c) {
            bail!("class {} has no samples", run.class_name(c));
        }
    }
    Ok(LesionData {
        features,
        images,
        y,
        classes,
    })
}

/// Writes the feature matrix of a lesion source as `features.csv`.
pub fn cmd_features(ctx: &Ctx, run: &LesionRun) -> Result<Report> {
    let cfg = RunConfig::Lesion(run.clone());
    let mut report = Report::new("Lesion features", "features", run.seed, &cfg)?;
    let data = load(run)?;
    let mut buf = Vec::new();
    data.features.write_csv(&mut buf)?;
    write_text(&prepare(&ctx.out_dir, "features.csv")?, &String::from_utf8(buf)?)?;
    report.outputs.push("features.csv".into());
    let mut t = Table::new("classes", "Samples per class", &["class", "name", "samples"]);
    for c in 0..data.classes {
        t.push(vec![
            c.to_string(),
            run.class_name(c),
            data.y.iter().filter(|&&l| l == c).count().to_string(),
        ]);
    }
    t.push(vec!["all".into(), "".into(), data.y.len().to_string()]);
    report.tables.push(t);
    report
        .notes
        .push(format!("{} features per sample", data.features.names.len()));
    report.write(&ctx.out_dir)?;
    Ok(report)
}

/// Augmented copies of every image, described like the originals.
fn augmented_rows(images: &[ColorImage], y: &[usize], run: &LesionRun) -> Result<Vec<ExtraRow>> {
    let per_image = images
        .par_iter()
        .enumerate()
        .map(|(i, img)| {
            let spec = AugmentSpec {
                seed: SplitMix64::derive(run.augment.seed, i as u64).next_u64(),
                ..run.augment.clone()
            };
            augment(img, &spec)?
                .iter()
                .map(|a| {
                    let mask = lesion_mask(a)?;
                    Ok(ExtraRow {
                        source: i,
                        features: extract_with(a, &mask, &run.glcm, &run.lbp)?.values,
                        label: y[i],
                    })
                })
                .collect::<medkit::Result<Vec<_>>>()
                .map_err(|e| e.in_case(format!("augmented image {i}")))
        })
        .collect::<medkit::Result<Vec<_>>>()?;
    Ok(per_image.into_iter().flatten().collect())
}

/// Indices that received an out-of-fold prediction.
fn evaluated(cv: &CvResult) -> Vec<usize> {
    (0..cv.truth.len())
        .filter(|&i| !cv.probabilities[i].is_empty())
        .collect()
}

struct Scores {
    acc: f64,
    prc: f64,
    rec: f64,
    f1: f64,
    auc: Option<f64>,
    bacc: f64,
    bma: f64,
    kappa: f64,
}

/// Macro one-vs-rest AUC over the classes that have both positives and negatives.
fn macro_auc(cv: &CvResult, idx: &[usize]) -> (Option<f64>, Vec<(usize, Vec<RocPoint>)>) {
    let mut aucs = Vec::new();
    let mut curves = Vec::new();
    for c in 0..cv.classes {
        let scores: Vec<f64> = idx.iter().map(|&i| cv.probabilities[i][c]).collect();
        let labels: Vec<bool> = idx.iter().map(|&i| cv.truth[i] == c).collect();
        if let Ok((auc, pts)) = roc_auc(&scores, &labels) {
            aucs.push(auc);
            curves.push((c, pts));
        }
    }
    let auc = (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64);
    (auc, curves)
}

fn scores(cv: &CvResult, idx: &[usize]) -> Result<Scores> {
    let truth: Vec<usize> = idx.iter().map(|&i| cv.truth[i]).collect();
    let pred: Vec<usize> = idx.iter().map(|&i| cv.predictions[i]).collect();
    let r = classification_report(&ConfusionMatrix::from_predictions(&truth, &pred, cv.classes)?)?;
    Ok(Scores {
        acc: r.accuracy,
        prc: r.macro_precision,
        rec: r.macro_recall,
        f1: r.macro_f1,
        auc: macro_auc(cv, idx).0,
        bacc: r.balanced_accuracy,
        bma: r.bma,
        kappa: r.kappa,
    })
}

/// Positive-class scores of a two-class run.
fn binary_scores(cv: &CvResult) -> Result<Scores> {
    let idx = evaluated(cv);
    let truth: Vec<usize> = idx.iter().map(|&i| cv.truth[i]).collect();
    let pred: Vec<usize> = idx.iter().map(|&i| cv.predictions[i]).collect();
    let r = classification_report(&ConfusionMatrix::from_predictions(&truth, &pred, 2)?)?;
    let pos = &r.per_class[1];
    let scores: Vec<f64> = idx.iter().map(|&i| cv.probabilities[i][1]).collect();
    let labels: Vec<bool> = truth.iter().map(|&t| t == 1).collect();
    Ok(Scores {
        acc: r.accuracy,
        prc: pos.precision,
        rec: pos.recall,
        f1: pos.f1,
        auc: roc_auc(&scores, &labels).ok().map(|a| a.0),
        bacc: r.balanced_accuracy,
        bma: r.bma,
        kappa: r.kappa,
    })
}

const GRID: [&str; 8] = ["ACC", "PRC", "REC", "F1", "AUC", "BACC", "BMA", "Kappa"];

fn grid_value(s: &Scores, metric: &str) -> String {
    match metric {
        "ACC" => fmt(s.acc),
        "PRC" => fmt(s.prc),
        "REC" => fmt(s.rec),
        "F1" => fmt(s.f1),
        "AUC" => fmt_opt(s.auc),
        "BACC" => fmt(s.bacc),
        "BMA" => fmt(s.bma),
        _ => fmt(s.kappa),
    }
}

fn grid(name: String, title: String, models: &[String], scores: &[Scores]) -> Table {
    let mut cols = vec!["metric"];
    cols.extend(models.iter().map(String::as_str));
    let mut t = Table::new(name, title, &cols);
    for m in GRID {
        let mut row = vec![m.to_string()];
        row.extend(scores.iter().map(|s| grid_value(s, m)));
        t.push(row);
    }
    t
}

fn fold_table(name: String, title: String, cv: &CvResult) -> Result<Table> {
    let cols = ["fold", "ACC", "PRC", "REC", "F1", "BACC", "Kappa"];
    let mut t = Table::new(name, title, &cols);
    let idx = evaluated(cv);
    let folds = idx.iter().map(|&i| cv.fold_of[i]).max().map_or(0, |m| m + 1);
    let mut sums = [0.0; 6];
    for f in 0..folds {
        let fi: Vec<usize> = idx.iter().copied().filter(|&i| cv.fold_of[i] == f).collect();
        let s = scores(cv, &fi)?;
        let v = [s.acc, s.prc, s.rec, s.f1, s.bacc, s.kappa];
        for (a, b) in sums.iter_mut().zip(v) {
            *a += b;
        }
        let mut row = vec![format!("Fold {}", f + 1)];
        row.extend(v.iter().map(|&x| fmt(x)));
        t.push(row);
    }
    let mut row = vec!["Average".to_string()];
    row.extend(sums.iter().map(|&x| fmt(x / folds as f64)));
    t.push(row);
    Ok(t)
}

/// PCA cannot keep more components than the smallest training fold allows.
fn effective_components(run: &LesionRun, data: &LesionData) -> Result<Option<usize>> {
    let Some(k) = run.pca_components else { return Ok(None) };
    let folds = split(&data.y, data.classes, &run.split)?;
    let min_train = folds.iter().map(|f| f.train.len()).min().unwrap_or(0);
    let cap = min_train.saturating_sub(1).min(data.features.names.len());
    Ok(Some(k.min(cap)))
}

/// Cross-validated classification for every balance mode and model, plus
/// optional one-vs-all runs.
pub fn cmd_classify(ctx: &Ctx, run: &LesionRun) -> Result<Report> {
    let cfg = RunConfig::Lesion(run.clone());
    let mut report = Report::new("Skin lesion classification", "classify", run.seed, &cfg)?;
    let data = load(run)?;
    let x = &data.features.rows;
    let y = &data.y;
    let components = effective_components(run, &data)?;
    if components != run.pca_components {
        report.notes.push(format!(
            "PCA reduced to {} components to fit the smallest training fold",
            components.unwrap_or(0)
        ));
    }
    let extras = if run.balance.contains(&Balance::Augment) {
        let images = data.images.as_deref().context("augmentation needs images")?;
        augmented_rows(images, y, run)?
    } else {
        Vec::new()
    };
    let names: Vec<String> = run.models.iter().map(|m| m.name.clone()).collect();
    let pipeline = |mode: Balance, model: usize, classifier| PipelineConfig {
        standardize: run.standardize,
        pca_components: components,
        smote_k: (mode == Balance::Smote).then_some(run.smote_k),
        class_weights: mode == Balance::ClassWeights,
        classifier,
        seed: SplitMix64::derive(run.seed, 200 + model as u64).next_u64(),
    };

    for &mode in &run.balance {
        let dir = mode.slug();
        let extra: &[ExtraRow] = if mode == Balance::Augment { &extras } else { &[] };
        let mut all_scores = Vec::new();
        let mut curves = Vec::new();
        for (mi, model) in run.models.iter().enumerate() {
            log::info!("{}: {} cross-validation", mode.label(), model.name);
            let pc = pipeline(mode, mi, model.spec.clone());
            let cv = cross_validate_with_extras(&pc, x, y, data.classes, &run.split, extra)
                .with_context(|| format!("model {} ({})", model.name, mode.label()))?;
            let idx = evaluated(&cv);
            all_scores.push(scores(&cv, &idx)?);
            report.tables.push(fold_table(
                format!("{dir}/folds_{}", slug(&model.name)),
                format!("{} per fold ({})", model.name, mode.label()),
                &cv,
            )?);
            let named: Vec<(String, Vec<RocPoint>)> = macro_auc(&cv, &idx)
                .1
                .into_iter()
                .map(|(c, pts)| (run.class_name(c), pts))
                .collect();
            let rel = format!("{dir}/roc_{}.svg", slug(&model.name));
            write_text(&prepare(&ctx.out_dir, &rel)?, &roc_svg(&named))?;
            report.outputs.push(rel);
            curves.push(cv);
        }
        report.tables.push(grid(
            format!("{dir}/metrics"),
            format!("Cross-validated metrics ({})", mode.label()),
            &names,
            &all_scores,
        ));
        report
            .tables
            .push(predictions_table(format!("{dir}/predictions"), run, &names, &curves));

        if run.one_vs_all && data.classes > 2 {
            for c in 0..data.classes {
                let yb = one_vs_all(y, c)?;
                let extra_b: Vec<ExtraRow> = extra
                    .iter()
                    .map(|e| ExtraRow {
                        label: usize::from(e.label == c),
                        ..e.clone()
                    })
                    .collect();
                let mut s = Vec::new();
                for (mi, model) in run.models.iter().enumerate() {
                    let pc = pipeline(mode, mi, model.spec.clone());
                    let cv = cross_validate_with_extras(&pc, x, &yb, 2, &run.split, &extra_b)
                        .with_context(|| format!("{} vs. others, model {}", run.class_name(c), model.name))?;
                    s.push(binary_scores(&cv)?);
                }
                report.tables.push(grid(
                    format!("{dir}/ova_{}", slug(&run.class_name(c))),
                    format!("{} vs. Others ({})", run.class_name(c), mode.label()),
                    &names,
                    &s,
                ));
            }
        }
    }
    report.write(&ctx.out_dir)?;
    Ok(report)
}

fn predictions_table(name: String, run: &LesionRun, models: &[String], cvs: &[CvResult]) -> Table {
    let classes = cvs[0].classes;
    let mut cols: Vec<String> = vec!["sample".into(), "truth".into(), "fold".into()];
    for m in models {
        cols.push(format!("{m}:predicted"));
        cols.extend((0..classes).map(|c| format!("{m}:p_{}", run.class_name(c))));
    }
    let refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut t = Table::new(name, "Out-of-fold predictions", &refs);
    for i in evaluated(&cvs[0]) {
        let mut row = vec![
            i.to_string(),
            cvs[0].truth[i].to_string(),
            (cvs[0].fold_of[i] + 1).to_string(),
        ];
        for cv in cvs {
            row.push(cv.predictions[i].to_string());
            row.extend(cv.probabilities[i].iter().map(|&p| format!("{p:.6}")));
        }
        t.push(row);
    }
    t
}
