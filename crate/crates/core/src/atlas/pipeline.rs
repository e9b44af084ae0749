//! Leave-one-out brain segmentation with every atlas strategy.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fusion::{foreground_mask, fuse_majority, fuse_mi_weighted, segment_label_propagation, AtlasEntry};
use super::probabilistic::build_probabilistic_atlas;
use super::tissue_model::{build_tissue_models, segment_posterior, segment_tissue_model};
use crate::error::{Error, Result};
use crate::preprocess::{correct_bias, minmax_normalize, BiasFieldConfig};
use crate::registration::{ParameterMap, PresetLibrary};
use crate::volume::{LabelVolume, ScalarVolume};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentationMethod {
    TissueModel,
    LabelPropagation,
    TopologicalAtlas,
    Posterior,
    MajorityVoting,
    MiWeighted,
}

impl SegmentationMethod {
    pub const ALL: [SegmentationMethod; 6] = [
        Self::TissueModel,
        Self::LabelPropagation,
        Self::TopologicalAtlas,
        Self::Posterior,
        Self::MajorityVoting,
        Self::MiWeighted,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::TissueModel => "tissue-model",
            Self::LabelPropagation => "label-propagation",
            Self::TopologicalAtlas => "topological-atlas",
            Self::Posterior => "posterior",
            Self::MajorityVoting => "majority-voting",
            Self::MiWeighted => "mi-weighted",
        }
    }

    fn needs_atlas(self) -> bool {
        matches!(self, Self::TopologicalAtlas | Self::Posterior)
    }

    fn needs_all_entries(self) -> bool {
        matches!(self, Self::MajorityVoting | Self::MiWeighted)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmentationConfig {
    pub methods: Vec<SegmentationMethod>,
    /// Preset used when `maps` is absent.
    pub preset: String,
    pub maps: Option<Vec<ParameterMap>>,
    pub pdf_bins: usize,
    pub mi_bins: usize,
    /// Off by default: a whole-head polynomial fit absorbs the radial tissue
    /// layout of the phantoms.
    pub bias_correction: Option<BiasFieldConfig>,
    /// Training case (by position) that hosts the probabilistic atlas.
    pub reference: usize,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            methods: SegmentationMethod::ALL.to_vec(),
            preset: "affine-mi".into(),
            maps: None,
            pdf_bins: 64,
            mi_bins: 64,
            bias_correction: None,
            reference: 0,
        }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::invalid("at least one segmentation method is required"));
        }
        if self.pdf_bins == 0 || self.mi_bins < 2 {
            return Err(Error::invalid("pdf_bins must be ≥ 1 and mi_bins ≥ 2"));
        }
        if let Some(b) = &self.bias_correction {
            b.validate()?;
        }
        match &self.maps {
            Some(m) => m.iter().try_for_each(ParameterMap::validate),
            None if PresetLibrary::NAMES.contains(&self.preset.as_str()) => Ok(()),
            None => Err(Error::invalid(format!("unknown preset {:?}", self.preset))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrainCase {
    pub id: String,
    pub intensity: ScalarVolume,
    pub labels: LabelVolume,
}

/// A case after bias correction and normalisation over its head mask.
#[derive(Debug, Clone)]
pub struct PreparedCase {
    pub id: String,
    pub normalized: ScalarVolume,
    pub mask: Vec<bool>,
    pub labels: LabelVolume,
}

pub fn prepare_case(case: &BrainCase, cfg: &SegmentationConfig) -> Result<PreparedCase> {
    case.intensity
        .geometry()
        .ensure_same(case.labels.geometry(), &format!("case {}", case.id))?;
    let mask = foreground_mask(&case.intensity);
    let corrected = match &cfg.bias_correction {
        Some(b) if mask.iter().any(|&m| m) => {
            correct_bias(&case.intensity, &mask, b)
                .map_err(|e| e.in_case(&case.id))?
                .corrected
        }
        _ => case.intensity.clone(),
    };
    let norm = minmax_normalize(&corrected, Some(&mask));
    let data = norm
        .data()
        .iter()
        .zip(&mask)
        .map(|(&v, &m)| if m { v } else { 0.0 })
        .collect();
    Ok(PreparedCase {
        id: case.id.clone(),
        normalized: norm.with_data(data)?,
        mask,
        labels: case.labels.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseSegmentation {
    pub case_id: String,
    pub outputs: Vec<(SegmentationMethod, LabelVolume)>,
}

fn resolve_maps(cfg: &SegmentationConfig, target: &ScalarVolume) -> Result<Vec<ParameterMap>> {
    match &cfg.maps {
        Some(m) => Ok(m.clone()),
        None => PresetLibrary::get(&cfg.preset, target.geometry()),
    }
}

/// Runs the configured methods on `target` using `training` as atlases.
pub fn segment_case(
    target: &PreparedCase,
    training: &[&PreparedCase],
    cfg: &SegmentationConfig,
    seed: u64,
) -> Result<CaseSegmentation> {
    if training.is_empty() {
        return Err(Error::invalid("segmentation needs at least one training case"));
    }
    if cfg.reference >= training.len() {
        return Err(Error::invalid(format!(
            "reference index {} outside {} training cases",
            cfg.reference,
            training.len()
        )));
    }
    let maps = resolve_maps(cfg, &target.normalized)?;
    let fixed = &target.normalized;
    let wants = |m: SegmentationMethod| cfg.methods.contains(&m);
    let all_entries = cfg.methods.iter().any(|m| m.needs_all_entries());
    let atlas_needed = cfg.methods.iter().any(|m| m.needs_atlas());

    let propagate = |t: &PreparedCase| -> Result<AtlasEntry> {
        segment_label_propagation(fixed, (&t.normalized, &t.labels), &maps, seed, &t.id)
    };
    let entries: Vec<AtlasEntry> = if all_entries {
        training.par_iter().map(|t| propagate(t)).collect::<Result<_>>()?
    } else if wants(SegmentationMethod::LabelPropagation) || atlas_needed {
        vec![propagate(training[cfg.reference])?]
    } else {
        Vec::new()
    };
    let reference_entry = |entries: &[AtlasEntry]| {
        if all_entries {
            entries[cfg.reference].clone()
        } else {
            entries[0].clone()
        }
    };

    let model = if wants(SegmentationMethod::TissueModel) || wants(SegmentationMethod::Posterior) {
        let inputs: Vec<(&ScalarVolume, &LabelVolume)> = training.iter().map(|t| (&t.normalized, &t.labels)).collect();
        Some(build_tissue_models(&inputs, cfg.pdf_bins)?)
    } else {
        None
    };
    let atlas = if atlas_needed {
        let reference = training[cfg.reference];
        let pairs: Vec<(ScalarVolume, LabelVolume)> = training
            .iter()
            .map(|t| (t.normalized.clone(), t.labels.clone()))
            .collect();
        let atlas = build_probabilistic_atlas(&reference.normalized, &pairs, &maps, seed)?;
        Some(atlas.warp(&reference_entry(&entries).chain, fixed.geometry())?)
    } else {
        None
    };

    let mut outputs = Vec::new();
    for &m in &cfg.methods {
        let labels = match m {
            SegmentationMethod::TissueModel => {
                segment_tissue_model(fixed, model.as_ref().expect("model"), &target.mask)?
            }
            SegmentationMethod::LabelPropagation => reference_entry(&entries).propagated_labels,
            SegmentationMethod::TopologicalAtlas => atlas.as_ref().expect("atlas").topological.clone(),
            SegmentationMethod::Posterior => {
                segment_posterior(fixed, atlas.as_ref().expect("atlas"), model.as_ref().expect("model"))?
            }
            SegmentationMethod::MajorityVoting => fuse_majority(&entries)?,
            SegmentationMethod::MiWeighted => fuse_mi_weighted(&entries, fixed, cfg.mi_bins)?,
        };
        outputs.push((m, labels));
    }
    Ok(CaseSegmentation {
        case_id: target.id.clone(),
        outputs,
    })
}

/// Each case in turn is the target; the others are its atlases.
pub fn leave_one_out(cases: &[BrainCase], cfg: &SegmentationConfig, seed: u64) -> Result<Vec<CaseSegmentation>> {
    cfg.validate()?;
    if cases.len() < 2 {
        return Err(Error::invalid("leave-one-out needs at least two cases"));
    }
    let prepared = cases
        .par_iter()
        .map(|c| prepare_case(c, cfg))
        .collect::<Result<Vec<_>>>()?;
    (0..prepared.len())
        .into_par_iter()
        .map(|t| {
            let training: Vec<&PreparedCase> = prepared
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != t)
                .map(|(_, c)| c)
                .collect();
            segment_case(&prepared[t], &training, cfg, seed).map_err(|e| e.in_case(&prepared[t].id))
        })
        .collect()
}
