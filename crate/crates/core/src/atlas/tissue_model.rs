//! Per-class intensity PDFs and the segmentations that use them.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::probabilistic::{ProbabilisticAtlas, TISSUE_CLASSES};
use crate::error::{Error, Result};
use crate::volume::{tissue, LabelVolume, ScalarVolume};

/// Histogram PDFs over normalised intensity `[0, 1]`, one per tissue class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TissueModel {
    pub bins: usize,
    /// `bins + 1` edges from 0 to 1.
    pub edges: Vec<f64>,
    /// CSF, GM, WM.
    pub pdfs: Vec<Vec<f64>>,
}

impl TissueModel {
    pub fn bin_of(&self, v: f64) -> usize {
        ((v * self.bins as f64).floor().max(0.0) as usize).min(self.bins - 1)
    }

    /// Likelihood of `v` under the PDF of class index `k` (0 = CSF).
    pub fn likelihood(&self, k: usize, v: f64) -> f64 {
        self.pdfs[k][self.bin_of(v)]
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins == 0 || self.edges.len() != self.bins + 1 || self.pdfs.len() != 3 {
            return Err(Error::format("tissue model needs bins + 1 edges and three PDFs"));
        }
        for pdf in &self.pdfs {
            if pdf.len() != self.bins || pdf.iter().any(|p| !(*p >= 0.0)) {
                return Err(Error::format("tissue model PDF has wrong length or negative mass"));
            }
            if (pdf.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::format("tissue model PDF does not sum to 1"));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Histograms intensities per class over all inputs and normalises them.
/// Classes without voxels fall back to a uniform PDF.
pub fn build_tissue_models(inputs: &[(&ScalarVolume, &LabelVolume)], bins: usize) -> Result<TissueModel> {
    if bins == 0 {
        return Err(Error::invalid("tissue model needs at least one bin"));
    }
    let mut model = TissueModel {
        bins,
        edges: (0..=bins).map(|i| i as f64 / bins as f64).collect(),
        pdfs: vec![vec![0.0; bins]; 3],
    };
    let mut counts = vec![vec![0u64; bins]; 3];
    for (i, (v, l)) in inputs.iter().enumerate() {
        v.geometry()
            .ensure_same(l.geometry(), &format!("tissue model input {i}"))?;
        for (&x, &c) in v.data().iter().zip(l.data()) {
            if (1..tissue::CLASS_COUNT).contains(&c) {
                counts[c as usize - 1][model.bin_of(x)] += 1;
            }
        }
    }
    if counts.iter().flatten().all(|&n| n == 0) {
        return Err(Error::invalid("no labelled voxels to build tissue models from"));
    }
    for (k, (pdf, cnt)) in model.pdfs.iter_mut().zip(&counts).enumerate() {
        let total: u64 = cnt.iter().sum();
        if total == 0 {
            log::warn!("class {} has no voxels; using a uniform PDF", tissue::NAMES[k]);
            pdf.fill(1.0 / bins as f64);
        } else {
            for (p, &n) in pdf.iter_mut().zip(cnt) {
                *p = n as f64 / total as f64;
            }
        }
    }
    Ok(model)
}

fn argmax(scores: [f64; 3]) -> u16 {
    let mut best = 0;
    for k in 1..3 {
        if scores[k] > scores[best] {
            best = k;
        }
    }
    TISSUE_CLASSES[best]
}

/// Maximum-likelihood class inside `mask`, background outside.
pub fn segment_tissue_model(target_norm: &ScalarVolume, model: &TissueModel, mask: &[bool]) -> Result<LabelVolume> {
    let geom = *target_norm.geometry();
    if mask.len() != geom.len() {
        return Err(Error::Geometry("brain mask size does not match target".into()));
    }
    let data = target_norm
        .data()
        .iter()
        .zip(mask)
        .map(|(&v, &m)| {
            if m {
                argmax([0, 1, 2].map(|k| model.likelihood(k, v)))
            } else {
                tissue::BACKGROUND
            }
        })
        .collect();
    LabelVolume::new(geom, data, tissue::CLASS_COUNT)
}

/// Maximum a posteriori class from atlas priors and intensity likelihoods.
/// Voxels with no posterior mass are background.
pub fn segment_posterior(
    target_norm: &ScalarVolume,
    atlas: &ProbabilisticAtlas,
    model: &TissueModel,
) -> Result<LabelVolume> {
    let geom = *target_norm.geometry();
    atlas.geometry().ensure_same(&geom, "posterior atlas")?;
    let data = target_norm
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let post = [0, 1, 2].map(|k| atlas.class_priors[k].data()[i] * model.likelihood(k, v));
            if post.iter().sum::<f64>() > 0.0 {
                argmax(post)
            } else {
                tissue::BACKGROUND
            }
        })
        .collect();
    LabelVolume::new(geom, data, tissue::CLASS_COUNT)
}
