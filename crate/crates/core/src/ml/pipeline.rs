//! Standardize → PCA → rebalance → classifier, and stratified
//! cross-validation of that chain.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{argmax, predict_proba, train, ClassifierSpec, TrainedModel};
use super::pca::{pca_fit, PcaModel, DEFAULT_COMPONENTS};
use super::resample::{class_weights, smote};
use super::scale::{standardize_fit, Standardizer};
use super::split::{split, SplitConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub standardize: bool,
    /// Principal components kept; `None` skips PCA.
    pub pca_components: Option<usize>,
    /// SMOTE neighbour count; `None` skips oversampling.
    pub smote_k: Option<usize>,
    /// Balanced loss weights for MLP members without explicit weights.
    pub class_weights: bool,
    pub classifier: ClassifierSpec,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            standardize: true,
            pca_components: Some(DEFAULT_COMPONENTS),
            smote_k: Some(5),
            class_weights: false,
            classifier: ClassifierSpec::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPipeline {
    pub scaler: Option<Standardizer>,
    pub pca: Option<PcaModel>,
    pub model: TrainedModel,
}

fn transform_row(scaler: Option<&Standardizer>, pca: Option<&PcaModel>, row: &[f64]) -> Vec<f64> {
    let r = scaler.map_or_else(|| row.to_vec(), |s| s.apply_row(row));
    pca.map_or(r.clone(), |p| p.project_row(&r))
}

impl FittedPipeline {
    pub fn transform(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter()
            .map(|r| transform_row(self.scaler.as_ref(), self.pca.as_ref(), r))
            .collect()
    }

    pub fn predict_proba(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        predict_proba(&self.model, &self.transform(x))
    }
}

pub fn fit_pipeline(cfg: &PipelineConfig, x: &[Vec<f64>], y: &[usize], classes: usize) -> Result<FittedPipeline> {
    let scaler = if cfg.standardize {
        Some(standardize_fit(x)?)
    } else {
        None
    };
    let scaled: Vec<Vec<f64>> = x.iter().map(|r| transform_row(scaler.as_ref(), None, r)).collect();
    let pca = cfg.pca_components.map(|k| pca_fit(&scaled, k)).transpose()?;
    let z: Vec<Vec<f64>> = scaled.iter().map(|r| transform_row(None, pca.as_ref(), r)).collect();
    let (z, yy) = match cfg.smote_k {
        Some(k) => smote(&z, y, classes, k, cfg.seed)?,
        None => (z, y.to_vec()),
    };
    let spec = if cfg.class_weights {
        cfg.classifier.with_default_class_weights(&class_weights(&yy, classes)?)
    } else {
        cfg.classifier.clone()
    };
    Ok(FittedPipeline {
        scaler,
        pca,
        model: train(&spec, &z, &yy, classes)?,
    })
}

/// Out-of-fold predictions for every sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub classes: usize,
    pub fold_of: Vec<usize>,
    pub probabilities: Vec<Vec<f64>>,
    pub predictions: Vec<usize>,
    pub truth: Vec<usize>,
}

/// Fits the pipeline on each training partition and predicts its held-out
/// part. Folds train in parallel; results do not depend on scheduling.
pub fn cross_validate(
    cfg: &PipelineConfig,
    x: &[Vec<f64>],
    y: &[usize],
    classes: usize,
    scheme: &SplitConfig,
) -> Result<CvResult> {
    cross_validate_with_extras(cfg, x, y, classes, scheme, &[])
}

/// Extra training rows derived from a sample, such as augmented copies.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtraRow {
    pub source: usize,
    pub features: Vec<f64>,
    pub label: usize,
}

/// As [`cross_validate`]; each fold also trains on the extras whose source
/// sample lies in its training part.
pub fn cross_validate_with_extras(
    cfg: &PipelineConfig,
    x: &[Vec<f64>],
    y: &[usize],
    classes: usize,
    scheme: &SplitConfig,
    extras: &[ExtraRow],
) -> Result<CvResult> {
    if x.len() != y.len() {
        return Err(Error::invalid("one label per row required"));
    }
    let folds = split(y, classes, scheme)?;
    let per_fold = folds
        .par_iter()
        .enumerate()
        .map(|(f, fold)| {
            let mut xt: Vec<Vec<f64>> = fold.train.iter().map(|&i| x[i].clone()).collect();
            let mut yt: Vec<usize> = fold.train.iter().map(|&i| y[i]).collect();
            for e in extras.iter().filter(|e| fold.train.binary_search(&e.source).is_ok()) {
                xt.push(e.features.clone());
                yt.push(e.label);
            }
            let xv: Vec<Vec<f64>> = fold.test.iter().map(|&i| x[i].clone()).collect();
            let fitted = fit_pipeline(cfg, &xt, &yt, classes).map_err(|e| e.in_case(format!("fold {f}")))?;
            fitted.predict_proba(&xv)
        })
        .collect::<Result<Vec<_>>>()?;
    let n = y.len();
    let mut out = CvResult {
        classes,
        fold_of: vec![0; n],
        probabilities: vec![Vec::new(); n],
        predictions: vec![0; n],
        truth: y.to_vec(),
    };
    for (f, (fold, probs)) in folds.iter().zip(per_fold).enumerate() {
        for (&i, p) in fold.test.iter().zip(probs) {
            out.fold_of[i] = f;
            out.predictions[i] = argmax(&p);
            out.probabilities[i] = p;
        }
    }
    Ok(out)
}
