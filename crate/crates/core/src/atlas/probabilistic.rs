//! Probabilistic atlas: per-class prior volumes, a mean intensity volume and
//! the most-probable-class ("topological") map, all on a reference grid.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_labels, read_volume, write_labels, write_volume};
use crate::preprocess::minmax_normalize;
use crate::registration::{register, resample, resample_labels, Interpolation, ParameterMap, TransformChain};
use crate::volume::{tissue, Geometry, LabelVolume, ScalarVolume};

pub const TISSUE_CLASSES: [u16; 3] = [tissue::CSF, tissue::GM, tissue::WM];

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilisticAtlas {
    /// CSF, GM, WM priors in that order.
    pub class_priors: Vec<ScalarVolume>,
    pub mean_intensity: ScalarVolume,
    pub topological: LabelVolume,
    pub contributing_count: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    contributing_count: usize,
    classes: Vec<String>,
    priors: Vec<String>,
    mean: String,
    topological: String,
}

/// Argmax over priors, lowest class on ties, background where all are zero.
pub fn argmax_priors(priors: &[ScalarVolume]) -> LabelVolume {
    let geom = *priors[0].geometry();
    let data = (0..geom.len())
        .map(|i| {
            let mut best = 0u16;
            let mut best_p = 0.0;
            for (c, p) in priors.iter().enumerate() {
                let v = p.data()[i];
                if v > best_p {
                    best_p = v;
                    best = TISSUE_CLASSES[c];
                }
            }
            best
        })
        .collect();
    LabelVolume::new(geom, data, tissue::CLASS_COUNT).expect("tissue labels")
}

impl ProbabilisticAtlas {
    /// Atlas from label maps and intensities already on a common grid.
    pub fn from_aligned(pairs: &[(ScalarVolume, LabelVolume)]) -> Result<Self> {
        let Some((first, _)) = pairs.first() else {
            return Err(Error::invalid("atlas needs at least one training pair"));
        };
        let geom = *first.geometry();
        for (i, (v, l)) in pairs.iter().enumerate() {
            v.geometry().ensure_same(&geom, &format!("training intensity {i}"))?;
            l.geometry().ensure_same(&geom, &format!("training labels {i}"))?;
            if let Some(&bad) = l.data().iter().find(|&&c| c >= tissue::CLASS_COUNT) {
                return Err(Error::invalid(format!("training labels {i}: class {bad} outside 0..3")));
            }
        }
        let n = geom.len();
        let mut counts = vec![[0u32; 3]; n];
        let mut mean = vec![0.0; n];
        for (v, l) in pairs {
            for (i, &c) in l.data().iter().enumerate() {
                if c > 0 {
                    counts[i][c as usize - 1] += 1;
                }
            }
            for (m, x) in mean.iter_mut().zip(minmax_normalize(v, None).data()) {
                *m += x;
            }
        }
        let k = pairs.len() as f64;
        mean.iter_mut().for_each(|m| *m /= k);
        let class_priors: Vec<ScalarVolume> = (0..3)
            .map(|c| {
                let data = counts
                    .iter()
                    .map(|cnt| {
                        let total: u32 = cnt.iter().sum();
                        if total == 0 {
                            0.0
                        } else {
                            cnt[c] as f64 / total as f64
                        }
                    })
                    .collect();
                ScalarVolume::from_parts_unchecked(geom, data)
            })
            .collect();
        Ok(Self {
            topological: argmax_priors(&class_priors),
            class_priors,
            mean_intensity: ScalarVolume::from_parts_unchecked(geom, mean),
            contributing_count: pairs.len(),
        })
    }

    pub fn geometry(&self) -> &Geometry {
        self.mean_intensity.geometry()
    }

    /// Brings the atlas onto `target` through a fixed → atlas chain. Priors
    /// are interpolated linearly and renormalised where any mass remains.
    pub fn warp(&self, chain: &TransformChain, target: &Geometry) -> Result<Self> {
        let mut priors = self
            .class_priors
            .iter()
            .map(|p| resample(p, chain, target, Interpolation::Linear).map(ScalarVolume::into_data))
            .collect::<Result<Vec<_>>>()?;
        for i in 0..target.len() {
            let s: f64 = priors.iter().map(|p| p[i]).sum();
            for p in priors.iter_mut() {
                p[i] = if s > 1e-12 { p[i] / s } else { 0.0 };
            }
        }
        let class_priors: Vec<ScalarVolume> = priors
            .into_iter()
            .map(|d| ScalarVolume::from_parts_unchecked(*target, d))
            .collect();
        Ok(Self {
            topological: argmax_priors(&class_priors),
            class_priors,
            mean_intensity: resample(&self.mean_intensity, chain, target, Interpolation::Linear)?,
            contributing_count: self.contributing_count,
        })
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let names = ["prior_csf.mhd", "prior_gm.mhd", "prior_wm.mhd"];
        for (p, name) in self.class_priors.iter().zip(names) {
            write_volume(p, dir.join(name))?;
        }
        write_volume(&self.mean_intensity, dir.join("mean.mhd"))?;
        write_labels(&self.topological, dir.join("topological.mhd"))?;
        let manifest = Manifest {
            contributing_count: self.contributing_count,
            classes: tissue::NAMES.iter().map(|s| s.to_string()).collect(),
            priors: names.iter().map(|s| s.to_string()).collect(),
            mean: "mean.mhd".into(),
            topological: "topological.mhd".into(),
        };
        let path = dir.join("atlas.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join("atlas.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: Manifest = serde_json::from_str(&text)?;
        if m.priors.len() != 3 {
            return Err(Error::format("atlas manifest must list three priors"));
        }
        let class_priors = m
            .priors
            .iter()
            .map(|p| read_volume(dir.join(p)))
            .collect::<Result<Vec<_>>>()?;
        let mean_intensity = read_volume(dir.join(&m.mean))?;
        let topo = read_labels(dir.join(&m.topological))?;
        let topological = LabelVolume::new(*topo.geometry(), topo.data().to_vec(), tissue::CLASS_COUNT)?;
        for p in &class_priors {
            p.geometry().ensure_same(mean_intensity.geometry(), "atlas prior")?;
        }
        Ok(Self {
            class_priors,
            mean_intensity,
            topological,
            contributing_count: m.contributing_count,
        })
    }
}

/// Registers every training image onto `reference` (nearest-neighbour
/// labels) and accumulates the atlas. No maps means the pairs are already
/// aligned.
pub fn build_probabilistic_atlas(
    reference: &ScalarVolume,
    training: &[(ScalarVolume, LabelVolume)],
    maps: &[ParameterMap],
    seed: u64,
) -> Result<ProbabilisticAtlas> {
    if training.is_empty() {
        return Err(Error::invalid("atlas needs at least one training pair"));
    }
    let geom = *reference.geometry();
    let aligned = training
        .par_iter()
        .enumerate()
        .map(|(i, (v, l))| align_pair(reference, v, l, maps, seed).map_err(|e| e.in_case(format!("training {i}"))))
        .collect::<Result<Vec<_>>>()?;
    debug_assert!(aligned.iter().all(|(v, _)| v.geometry().same_grid(&geom)));
    ProbabilisticAtlas::from_aligned(&aligned)
}

fn align_pair(
    reference: &ScalarVolume,
    intensity: &ScalarVolume,
    labels: &LabelVolume,
    maps: &[ParameterMap],
    seed: u64,
) -> Result<(ScalarVolume, LabelVolume)> {
    let geom = *reference.geometry();
    if maps.is_empty() {
        intensity.geometry().ensure_same(&geom, "pre-aligned intensity")?;
        labels.geometry().ensure_same(&geom, "pre-aligned labels")?;
        return Ok((intensity.clone(), labels.clone()));
    }
    let chain = register(reference, intensity, maps, seed)?.chain;
    Ok((
        resample(intensity, &chain, &geom, Interpolation::Linear)?,
        resample_labels(labels, &chain, &geom, Interpolation::Nearest)?,
    ))
}
