//! Classifier specifications, training and probability prediction.

use serde::{Deserialize, Serialize};

use super::forest::{train_forest, ForestModel, ForestParams};
use super::knn::KnnModel;
use super::mlp::{train_mlp, MlpParams};
use super::scale::check_rows;
use crate::error::{Error, Result};

fn default_k() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpSpec {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Weight decay on both weight matrices (biases excluded).
    pub l2: f64,
    pub seed: u64,
    /// Per-class loss weights; `None` weighs every sample equally.
    pub class_weights: Option<Vec<f64>>,
}

impl Default for MlpSpec {
    fn default() -> Self {
        Self {
            hidden: 64,
            epochs: 300,
            learning_rate: 0.5,
            l2: 1e-3,
            seed: 0,
            class_weights: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestSpec {
    pub trees: usize,
    pub max_depth: Option<usize>,
    /// Features examined per split; `None` means ⌊√d⌋.
    pub features_per_split: Option<usize>,
    pub seed: u64,
}

impl Default for ForestSpec {
    fn default() -> Self {
        Self {
            trees: 100,
            max_depth: None,
            features_per_split: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClassifierSpec {
    Knn {
        #[serde(default = "default_k")]
        k: usize,
    },
    Mlp(MlpSpec),
    Forest(ForestSpec),
    /// Unweighted soft vote over the members.
    Ensemble {
        members: Vec<ClassifierSpec>,
    },
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        ClassifierSpec::Mlp(MlpSpec::default())
    }
}

impl ClassifierSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ClassifierSpec::Knn { k } if *k == 0 => Err(Error::invalid("k-NN needs k ≥ 1")),
            ClassifierSpec::Knn { k } => {
                if k % 2 == 0 {
                    log::warn!("even k = {k} can tie votes; ties go to the lower class");
                }
                Ok(())
            }
            ClassifierSpec::Mlp(m) => {
                if m.hidden == 0 || !(m.learning_rate > 0.0) || !(m.l2 >= 0.0) {
                    return Err(Error::invalid("MLP needs hidden ≥ 1, learning rate > 0 and l2 ≥ 0"));
                }
                if let Some(w) = &m.class_weights {
                    if w.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                        return Err(Error::invalid("class weights must be positive"));
                    }
                }
                Ok(())
            }
            ClassifierSpec::Forest(f) if f.trees == 0 => Err(Error::invalid("a forest needs at least one tree")),
            ClassifierSpec::Forest(f) if f.features_per_split == Some(0) => {
                Err(Error::invalid("features per split must be ≥ 1"))
            }
            ClassifierSpec::Forest(_) => Ok(()),
            ClassifierSpec::Ensemble { members } if members.is_empty() => {
                Err(Error::invalid("an ensemble needs at least one member"))
            }
            ClassifierSpec::Ensemble { members } => members.iter().try_for_each(Self::validate),
        }
    }

    /// Fills unset MLP class weights, recursing into ensembles.
    pub fn with_default_class_weights(&self, weights: &[f64]) -> Self {
        match self {
            ClassifierSpec::Mlp(m) if m.class_weights.is_none() => ClassifierSpec::Mlp(MlpSpec {
                class_weights: Some(weights.to_vec()),
                ..m.clone()
            }),
            ClassifierSpec::Ensemble { members } => ClassifierSpec::Ensemble {
                members: members.iter().map(|m| m.with_default_class_weights(weights)).collect(),
            },
            other => other.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum Learned {
    Knn(KnnModel),
    Mlp { params: MlpParams, loss_history: Vec<f64> },
    Forest(ForestModel),
    Ensemble(Vec<TrainedModel>),
}

/// A trained classifier together with the spec that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ClassifierSpec,
    pub classes: usize,
    pub inputs: usize,
    pub learned: Learned,
}

pub fn train(spec: &ClassifierSpec, x: &[Vec<f64>], y: &[usize], classes: usize) -> Result<TrainedModel> {
    spec.validate()?;
    let d = check_rows(x)?;
    if x.len() != y.len() {
        return Err(Error::invalid("one label per row required"));
    }
    if let Some(&c) = y.iter().find(|&&c| c >= classes) {
        return Err(Error::invalid(format!("label {c} outside 0..{classes}")));
    }
    if y.iter().all(|&c| c == y[0]) {
        return Err(Error::invalid("training set holds a single class"));
    }
    let learned = match spec {
        ClassifierSpec::Knn { k } => Learned::Knn(KnnModel {
            k: *k,
            classes,
            x: x.to_vec(),
            y: y.to_vec(),
        }),
        ClassifierSpec::Mlp(m) => {
            let sample_w: Vec<f64> = match &m.class_weights {
                Some(w) if w.len() != classes => {
                    return Err(Error::invalid(format!(
                        "{} class weights for {classes} classes",
                        w.len()
                    )));
                }
                Some(w) => y.iter().map(|&c| w[c]).collect(),
                None => vec![1.0; y.len()],
            };
            let mut params = MlpParams::init(d, m.hidden, classes, m.seed);
            let loss_history = train_mlp(&mut params, x, y, &sample_w, m.epochs, m.learning_rate, m.l2);
            Learned::Mlp { params, loss_history }
        }
        ClassifierSpec::Forest(f) => Learned::Forest(train_forest(
            x,
            y,
            classes,
            &ForestParams {
                trees: f.trees,
                max_depth: f.max_depth,
                features_per_split: f.features_per_split.unwrap_or(((d as f64).sqrt() as usize).max(1)),
                seed: f.seed,
            },
        )),
        ClassifierSpec::Ensemble { members } => {
            Learned::Ensemble(members.iter().map(|m| train(m, x, y, classes)).collect::<Result<_>>()?)
        }
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        classes,
        inputs: d,
        learned,
    })
}

impl TrainedModel {
    pub fn predict_row(&self, row: &[f64]) -> Vec<f64> {
        match &self.learned {
            Learned::Knn(m) => m.predict_row(row),
            Learned::Mlp { params, .. } => params.predict_row(row),
            Learned::Forest(m) => m.predict_row(row),
            Learned::Ensemble(members) => {
                let mut p = vec![0.0; self.classes];
                for m in members {
                    for (a, b) in p.iter_mut().zip(m.predict_row(row)) {
                        *a += b;
                    }
                }
                p.iter_mut().for_each(|v| *v /= members.len() as f64);
                p
            }
        }
    }
}

/// `n × classes` class probabilities.
pub fn predict_proba(model: &TrainedModel, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let d = check_rows(x)?;
    if d != model.inputs {
        return Err(Error::invalid(format!(
            "model expects {} features, got {d}",
            model.inputs
        )));
    }
    Ok(x.iter().map(|r| model.predict_row(r)).collect())
}

/// Index of the largest probability; ties go to the lower class.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Unweighted mean of the members' probability matrices.
pub fn ensemble_soft_vote(models: &[&TrainedModel], x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let Some(first) = models.first() else {
        return Err(Error::invalid("soft vote needs at least one model"));
    };
    if models.iter().any(|m| m.classes != first.classes) {
        return Err(Error::invalid("ensemble members disagree on the class count"));
    }
    let mut out = predict_proba(first, x)?;
    for m in &models[1..] {
        for (row, p) in out.iter_mut().zip(predict_proba(m, x)?) {
            for (a, b) in row.iter_mut().zip(p) {
                *a += b;
            }
        }
    }
    let k = models.len() as f64;
    out.iter_mut().flatten().for_each(|v| *v /= k);
    Ok(out)
}
