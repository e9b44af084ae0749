//! Single-atlas label propagation and multi-atlas label fusion.

use crate::error::{Error, Result};
use crate::registration::{
    mutual_information, register, resample, resample_labels, Interpolation, ParameterMap, TransformChain,
};
use crate::volume::{LabelVolume, ScalarVolume};

/// One training case mapped onto the target grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AtlasEntry {
    pub registered_intensity: ScalarVolume,
    pub propagated_labels: LabelVolume,
    pub source_id: String,
    /// Target → training chain that produced this entry.
    pub chain: TransformChain,
}

/// Voxels strictly above the volume minimum. Skull-stripped volumes have a
/// flat background, so this is the head region.
pub fn foreground_mask(vol: &ScalarVolume) -> Vec<bool> {
    let (lo, _) = vol.min_max();
    vol.data().iter().map(|&v| v > lo).collect()
}

/// Registers the training intensity onto `target` and carries its labels
/// across with nearest-neighbour sampling. No maps means identity.
pub fn segment_label_propagation(
    target: &ScalarVolume,
    training: (&ScalarVolume, &LabelVolume),
    maps: &[ParameterMap],
    seed: u64,
    source_id: &str,
) -> Result<AtlasEntry> {
    let (intensity, labels) = training;
    let chain = if maps.is_empty() {
        TransformChain::identity()
    } else {
        register(target, intensity, maps, seed)
            .map_err(|e| e.in_case(source_id))?
            .chain
    };
    let geom = *target.geometry();
    Ok(AtlasEntry {
        registered_intensity: resample(intensity, &chain, &geom, Interpolation::Linear)?,
        propagated_labels: resample_labels(labels, &chain, &geom, Interpolation::Nearest)?,
        source_id: source_id.to_string(),
        chain,
    })
}

fn check_entries(entries: &[AtlasEntry]) -> Result<u16> {
    let Some(first) = entries.first() else {
        return Err(Error::invalid("label fusion needs at least one entry"));
    };
    let g = first.propagated_labels.geometry();
    for e in entries {
        e.propagated_labels
            .geometry()
            .ensure_same(g, &format!("entry {}", e.source_id))?;
    }
    Ok(entries
        .iter()
        .map(|e| e.propagated_labels.class_count())
        .max()
        .unwrap_or(2))
}

fn weighted_vote(entries: &[AtlasEntry], weights: &[f64], classes: u16) -> Result<LabelVolume> {
    let geom = *entries[0].propagated_labels.geometry();
    let k = classes as usize;
    let mut score = vec![0.0; k];
    let data = (0..geom.len())
        .map(|i| {
            score.fill(0.0);
            for (e, w) in entries.iter().zip(weights) {
                score[e.propagated_labels.data()[i] as usize] += w;
            }
            let mut best = 0;
            for c in 1..k {
                if score[c] > score[best] {
                    best = c;
                }
            }
            best as u16
        })
        .collect();
    LabelVolume::new(geom, data, classes)
}

/// Most frequent propagated label per voxel; lowest label on ties.
pub fn fuse_majority(entries: &[AtlasEntry]) -> Result<LabelVolume> {
    let classes = check_entries(entries)?;
    weighted_vote(entries, &vec![1.0; entries.len()], classes)
}

/// Global MI weights of each entry against the target foreground, clamped at
/// zero and normalised. All zero gives `None`.
pub fn mi_weights(entries: &[AtlasEntry], target: &ScalarVolume, mi_bins: usize) -> Result<Option<Vec<f64>>> {
    check_entries(entries)?;
    let mask = foreground_mask(target);
    let t: Vec<f64> = target
        .data()
        .iter()
        .zip(&mask)
        .filter(|(_, &m)| m)
        .map(|(&v, _)| v)
        .collect();
    if t.is_empty() {
        return Ok(None);
    }
    let mut w = Vec::with_capacity(entries.len());
    for e in entries {
        e.registered_intensity
            .geometry()
            .ensure_same(target.geometry(), &format!("entry {}", e.source_id))?;
        let m: Vec<f64> = e
            .registered_intensity
            .data()
            .iter()
            .zip(&mask)
            .filter(|(_, &k)| k)
            .map(|(&v, _)| v)
            .collect();
        w.push(mutual_information(&t, &m, mi_bins)?.max(0.0));
    }
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Ok(None);
    }
    w.iter_mut().for_each(|x| *x /= total);
    Ok(Some(w))
}

/// Votes weighted by each entry's MI with the target; falls back to
/// majority voting when every weight is zero.
pub fn fuse_mi_weighted(entries: &[AtlasEntry], target: &ScalarVolume, mi_bins: usize) -> Result<LabelVolume> {
    let classes = check_entries(entries)?;
    match mi_weights(entries, target, mi_bins)? {
        Some(w) => weighted_vote(entries, &w, classes),
        None => {
            log::warn!("all MI weights are zero; using majority voting");
            fuse_majority(entries)
        }
    }
}
