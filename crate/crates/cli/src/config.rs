//! Run configuration: one JSON document per pipeline, validated before any
//! work starts. Relative paths resolve against the config file's directory.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use medkit::atlas::SegmentationConfig;
use medkit::features::{AugmentOp, AugmentSpec, GlcmConfig, LbpConfig};
use medkit::ml::{ClassifierSpec, ForestSpec, MlpSpec, SplitConfig};
use medkit::phantom::{BrainSuiteConfig, LesionDatasetConfig, LungSliceConfig, PairConfig};
use medkit::preprocess::CtPreprocessConfig;
use medkit::registration::PresetLibrary;
use medkit::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pipeline", rename_all = "snake_case")]
pub enum RunConfig {
    Phantom(PhantomRun),
    Brain(BrainRun),
    Lung(LungRun),
    Lesion(LesionRun),
}

impl RunConfig {
    pub fn name(&self) -> &'static str {
        match self {
            RunConfig::Phantom(_) => "phantom",
            RunConfig::Brain(_) => "brain",
            RunConfig::Lung(_) => "lung",
            RunConfig::Lesion(_) => "lesion",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            RunConfig::Phantom(r) => r.seed,
            RunConfig::Brain(r) => r.seed,
            RunConfig::Lung(r) => r.seed,
            RunConfig::Lesion(r) => r.seed,
        }
    }

    /// Replaces the run seed. Phantom runs also reseed every generator;
    /// lesion runs rederive every model and split seed.
    pub fn set_seed(&mut self, seed: u64) {
        match self {
            RunConfig::Phantom(r) => {
                r.seed = seed;
                if let Some(b) = &mut r.brain {
                    b.seed = SplitMix64::derive(seed, 1).next_u64();
                }
                if let Some(l) = &mut r.lung {
                    l.slice.seed = SplitMix64::derive(seed, 2).next_u64();
                }
                if let Some(l) = &mut r.lesion {
                    l.seed = SplitMix64::derive(seed, 3).next_u64();
                }
            }
            RunConfig::Brain(r) => r.seed = seed,
            RunConfig::Lung(r) => r.seed = seed,
            RunConfig::Lesion(r) => {
                r.seed = seed;
                r.derive_seeds();
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RunConfig::Phantom(r) => {
                if let Some(b) = &r.brain {
                    b.validate()?;
                }
                if let Some(l) = &r.lung {
                    l.slice.validate()?;
                    if l.cases == 0 {
                        bail!("lung phantom needs at least one case");
                    }
                }
                if let Some(l) = &r.lesion {
                    l.validate()?;
                }
            }
            RunConfig::Brain(r) => {
                r.segmentation.validate()?;
                if let BrainSource::Phantom(s) = &r.source {
                    s.validate()?;
                }
            }
            RunConfig::Lung(r) => {
                if r.presets.is_empty() {
                    bail!("at least one preset required");
                }
                for p in &r.presets {
                    if !PresetLibrary::names().contains(&p.as_str()) {
                        bail!("unknown preset '{p}' (known: {})", PresetLibrary::names().join(", "));
                    }
                }
                if let LungSource::Phantom { slice, cases, .. } = &r.source {
                    slice.validate()?;
                    if *cases == 0 {
                        bail!("lung phantom needs at least one case");
                    }
                }
            }
            RunConfig::Lesion(r) => r.validate()?,
        }
        Ok(())
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match self {
            RunConfig::Brain(r) => {
                if let BrainSource::Files(cases) = &mut r.source {
                    for c in cases {
                        fix(&mut c.intensity);
                        fix(&mut c.labels);
                    }
                }
            }
            RunConfig::Lung(r) => {
                if let LungSource::Files(cases) = &mut r.source {
                    for c in cases {
                        fix(&mut c.fixed);
                        fix(&mut c.moving);
                        fix(&mut c.fixed_landmarks);
                        fix(&mut c.moving_landmarks);
                    }
                }
            }
            RunConfig::Lesion(r) => match &mut r.source {
                LesionSource::Images(entries) => entries.iter_mut().for_each(|e| fix(&mut e.path)),
                LesionSource::Features(p) => fix(p),
                LesionSource::Phantom(_) => {}
            },
            RunConfig::Phantom(_) => {}
        }
    }
}

/// Reads, path-resolves and validates a config file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut cfg: RunConfig =
        serde_json::from_str(&text).with_context(|| format!("config {} does not match the schema", path.display()))?;
    cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
    if let RunConfig::Lesion(r) = &mut cfg {
        r.derive_seeds();
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LungPhantom {
    pub slice: LungSliceConfig,
    pub pair: PairConfig,
    /// Case `i` draws its slice from stream `i` of the slice seed.
    pub cases: usize,
}

impl Default for LungPhantom {
    fn default() -> Self {
        Self {
            slice: LungSliceConfig {
                size: 128,
                ..Default::default()
            },
            pair: PairConfig::default(),
            cases: 2,
        }
    }
}

impl LungPhantom {
    pub fn slice_for(&self, case: usize) -> LungSliceConfig {
        LungSliceConfig {
            seed: SplitMix64::derive(self.slice.seed, case as u64).next_u64(),
            ..self.slice.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhantomRun {
    pub seed: u64,
    pub brain: Option<BrainSuiteConfig>,
    pub lung: Option<LungPhantom>,
    pub lesion: Option<LesionDatasetConfig>,
}

impl Default for PhantomRun {
    fn default() -> Self {
        Self {
            seed: 0,
            brain: Some(BrainSuiteConfig::default()),
            lung: Some(LungPhantom::default()),
            lesion: Some(LesionDatasetConfig::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFiles {
    pub id: String,
    pub intensity: PathBuf,
    pub labels: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BrainSource {
    Phantom(BrainSuiteConfig),
    Files(Vec<CaseFiles>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BrainRun {
    pub seed: u64,
    pub source: BrainSource,
    pub segmentation: SegmentationConfig,
    /// Report |AVD| instead of the signed relative difference.
    pub absolute_avd: bool,
    pub write_labels: bool,
}

impl Default for BrainRun {
    fn default() -> Self {
        Self {
            seed: 0,
            source: BrainSource::Phantom(BrainSuiteConfig::default()),
            segmentation: SegmentationConfig::default(),
            absolute_avd: false,
            write_labels: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairFiles {
    pub id: String,
    pub fixed: PathBuf,
    pub moving: PathBuf,
    pub fixed_landmarks: PathBuf,
    pub moving_landmarks: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LungSource {
    Phantom {
        slice: LungSliceConfig,
        pair: PairConfig,
        cases: usize,
    },
    Files(Vec<PairFiles>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LungRun {
    pub seed: u64,
    pub source: LungSource,
    pub presets: Vec<String>,
    /// CT artifact removal applied to both images before registration.
    pub preprocess: Option<CtPreprocessConfig>,
}

impl Default for LungRun {
    fn default() -> Self {
        let p = LungPhantom::default();
        Self {
            seed: 0,
            source: LungSource::Phantom {
                slice: p.slice,
                pair: p.pair,
                cases: p.cases,
            },
            presets: PresetLibrary::names().iter().map(|s| s.to_string()).collect(),
            preprocess: Some(CtPreprocessConfig::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageEntry {
    pub path: PathBuf,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LesionSource {
    Phantom(LesionDatasetConfig),
    Images(Vec<ImageEntry>),
    /// A feature CSV as written by `medkit features`.
    Features(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Balance {
    None,
    Smote,
    Augment,
    ClassWeights,
}

impl Balance {
    pub fn label(self) -> &'static str {
        match self {
            Balance::None => "without resampling",
            Balance::Smote => "with SMOTE",
            Balance::Augment => "with Augmentation",
            Balance::ClassWeights => "with class weights",
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            Balance::None => "none",
            Balance::Smote => "smote",
            Balance::Augment => "augment",
            Balance::ClassWeights => "class_weights",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedModel {
    pub name: String,
    pub spec: ClassifierSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LesionRun {
    pub seed: u64,
    pub source: LesionSource,
    /// Display names by class id; defaults to MEL, BCC, SCC.
    pub class_names: Option<Vec<String>>,
    pub glcm: GlcmConfig,
    pub lbp: LbpConfig,
    pub standardize: bool,
    pub pca_components: Option<usize>,
    pub smote_k: usize,
    pub models: Vec<NamedModel>,
    pub split: SplitConfig,
    pub balance: Vec<Balance>,
    pub augment: AugmentSpec,
    pub one_vs_all: bool,
}

impl Default for LesionRun {
    fn default() -> Self {
        let mut run = Self {
            seed: 0,
            source: LesionSource::Phantom(LesionDatasetConfig::default()),
            class_names: None,
            glcm: GlcmConfig::default(),
            lbp: LbpConfig::default(),
            standardize: true,
            pca_components: Some(70),
            smote_k: 5,
            models: vec![
                NamedModel {
                    name: "kNN".into(),
                    spec: ClassifierSpec::Knn { k: 5 },
                },
                NamedModel {
                    name: "MLP".into(),
                    spec: ClassifierSpec::Mlp(MlpSpec::default()),
                },
                NamedModel {
                    name: "RF".into(),
                    spec: ClassifierSpec::Forest(ForestSpec::default()),
                },
                NamedModel {
                    name: "RF+MLP".into(),
                    spec: ClassifierSpec::Ensemble {
                        members: vec![
                            ClassifierSpec::Forest(ForestSpec::default()),
                            ClassifierSpec::Mlp(MlpSpec::default()),
                        ],
                    },
                },
            ],
            split: SplitConfig::default(),
            balance: vec![Balance::Smote],
            augment: AugmentSpec {
                ops: vec![
                    AugmentOp::FlipH { probability: 0.5 },
                    AugmentOp::FlipV { probability: 0.5 },
                    AugmentOp::Zoom { min: 0.9, max: 1.1 },
                    AugmentOp::Contrast { gain: 1.2 },
                ],
                seed: 0,
                copies: 1,
            },
            one_vs_all: true,
        };
        run.derive_seeds();
        run
    }
}

fn reseed(spec: &mut ClassifierSpec, rng: &mut SplitMix64) {
    match spec {
        ClassifierSpec::Knn { .. } => {}
        ClassifierSpec::Mlp(m) => m.seed = rng.next_u64(),
        ClassifierSpec::Forest(f) => f.seed = rng.next_u64(),
        ClassifierSpec::Ensemble { members } => members.iter_mut().for_each(|m| reseed(m, rng)),
    }
}

impl LesionRun {
    /// Split, augmentation and model seeds all follow from the run seed.
    pub fn derive_seeds(&mut self) {
        let s = self.seed;
        match &mut self.split {
            SplitConfig::StratifiedKfold { seed, .. } | SplitConfig::StratifiedShuffle { seed, .. } => {
                *seed = SplitMix64::derive(s, 1).next_u64()
            }
        }
        self.augment.seed = SplitMix64::derive(s, 2).next_u64();
        for (i, m) in self.models.iter_mut().enumerate() {
            reseed(&mut m.spec, &mut SplitMix64::derive(s, 100 + i as u64));
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.glcm.validate()?;
        self.lbp.validate()?;
        self.split.validate()?;
        self.augment.validate()?;
        if self.models.is_empty() {
            bail!("at least one model required");
        }
        for m in &self.models {
            m.spec.validate().with_context(|| format!("model {}", m.name))?;
        }
        if self.balance.is_empty() {
            bail!("at least one balance mode required");
        }
        if self.smote_k == 0 {
            bail!("smote_k must be ≥ 1");
        }
        if let LesionSource::Phantom(p) = &self.source {
            p.validate()?;
        }
        if matches!(self.source, LesionSource::Features(_)) && self.balance.contains(&Balance::Augment) {
            bail!("augmentation needs images; a feature CSV source cannot be augmented");
        }
        Ok(())
    }

    pub fn class_name(&self, c: usize) -> String {
        const DEFAULT: [&str; 3] = ["MEL", "BCC", "SCC"];
        match &self.class_names {
            Some(names) => names.get(c).cloned().unwrap_or_else(|| format!("class {c}")),
            None => DEFAULT
                .get(c)
                .map(|s| s.to_string())
                .unwrap_or_else(|| format!("class {c}")),
        }
    }
}
