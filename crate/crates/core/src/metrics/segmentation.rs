//! Overlap, surface distance and volume metrics for label maps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{tissue, Geometry, LabelVolume};

/// 2|A∩B| / (|A|+|B|); two empty masks score 1.
pub fn dice_masks(a: &[bool], b: &[bool]) -> f64 {
    let (mut inter, mut na, mut nb) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.iter().zip(b) {
        na += x as usize;
        nb += y as usize;
        inter += (x && y) as usize;
    }
    if na + nb == 0 {
        1.0
    } else {
        2.0 * inter as f64 / (na + nb) as f64
    }
}

pub fn dice(a: &LabelVolume, b: &LabelVolume, class_id: u16) -> Result<f64> {
    a.geometry().ensure_same(b.geometry(), "dice")?;
    Ok(dice_masks(&a.mask_of(class_id), &b.mask_of(class_id)))
}

/// Mask voxels with a 6-neighbour outside the mask or the grid.
pub fn boundary_voxels(mask: &[bool], geom: &Geometry) -> Vec<[usize; 3]> {
    let [nx, ny, nz] = geom.dims;
    let mut out = Vec::new();
    for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        let [x, y, z] = geom.coords(i);
        let mut edge = false;
        for (a, n) in [(x, nx), (y, ny), (z, nz)] {
            if n > 1 && (a == 0 || a + 1 == n) {
                edge = true;
            }
        }
        let outside = |xx: usize, yy: usize, zz: usize| !mask[geom.index(xx, yy, zz)];
        edge = edge
            || (nx > 1 && (outside(x - 1, y, z) || outside(x + 1, y, z)))
            || (ny > 1 && (outside(x, y - 1, z) || outside(x, y + 1, z)))
            || (nz > 1 && (outside(x, y, z - 1) || outside(x, y, z + 1)));
        if edge {
            out.push([x, y, z]);
        }
    }
    out
}

fn directed(from: &[[f64; 3]], to: &[[f64; 3]]) -> f64 {
    let mut cmax = 0.0f64;
    for p in from {
        let mut cmin = f64::INFINITY;
        for q in to {
            let d = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
            if d < cmin {
                cmin = d;
                if cmin <= cmax {
                    // cannot raise the running maximum
                    break;
                }
            }
        }
        cmax = cmax.max(cmin);
    }
    cmax.sqrt()
}

/// Exact symmetric Hausdorff distance (mm) between mask boundaries.
pub fn hausdorff_masks(a: &[bool], b: &[bool], geom: &Geometry) -> Result<f64> {
    if a.len() != geom.len() || b.len() != geom.len() {
        return Err(Error::invalid("mask size does not match geometry"));
    }
    let to_mm = |v: Vec<[usize; 3]>| -> Vec<[f64; 3]> {
        v.into_iter()
            .map(|c| {
                [
                    c[0] as f64 * geom.spacing[0],
                    c[1] as f64 * geom.spacing[1],
                    c[2] as f64 * geom.spacing[2],
                ]
            })
            .collect()
    };
    let ba = to_mm(boundary_voxels(a, geom));
    let bb = to_mm(boundary_voxels(b, geom));
    if ba.is_empty() || bb.is_empty() {
        return Err(Error::invalid("Hausdorff distance needs two non-empty masks"));
    }
    // Interleaving the scan order makes the early break effective on
    // spatially sorted inputs while staying deterministic.
    let shuffle = |v: &[[f64; 3]]| -> Vec<[f64; 3]> {
        let stride = 7919 % v.len().max(1);
        let stride = if gcd(stride, v.len()) == 1 { stride } else { 1 };
        (0..v.len()).map(|i| v[(i * stride) % v.len()]).collect()
    };
    let (sa, sb) = (shuffle(&ba), shuffle(&bb));
    Ok(directed(&sa, &sb).max(directed(&sb, &sa)))
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn hausdorff(a: &LabelVolume, b: &LabelVolume, class_id: u16) -> Result<f64> {
    a.geometry().ensure_same(b.geometry(), "hausdorff")?;
    hausdorff_masks(&a.mask_of(class_id), &b.mask_of(class_id), a.geometry())
}

/// Signed relative volume difference (V_pred − V_ref)/V_ref.
pub fn avd(pred: &LabelVolume, reference: &LabelVolume, class_id: u16) -> Result<f64> {
    pred.geometry().ensure_same(reference.geometry(), "avd")?;
    let vr = reference.count(class_id);
    if vr == 0 {
        return Err(Error::invalid(format!("reference class {class_id} is empty")));
    }
    Ok((pred.count(class_id) as f64 - vr as f64) / vr as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub class_id: u16,
    pub name: String,
    pub dice: f64,
    /// `None` when either mask is empty.
    pub hausdorff_mm: Option<f64>,
    /// `None` when the reference class is empty.
    pub avd: Option<f64>,
}

/// Per-class scores for CSF, GM and WM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegScore {
    pub classes: Vec<ClassScore>,
}

impl SegScore {
    pub fn mean_dice(&self) -> f64 {
        self.classes.iter().map(|c| c.dice).sum::<f64>() / self.classes.len() as f64
    }

    pub fn dice_of(&self, class_id: u16) -> Option<f64> {
        self.classes.iter().find(|c| c.class_id == class_id).map(|c| c.dice)
    }
}

pub fn score_segmentation(pred: &LabelVolume, truth: &LabelVolume, absolute_avd: bool) -> Result<SegScore> {
    pred.geometry().ensure_same(truth.geometry(), "score_segmentation")?;
    let mut classes = Vec::new();
    for c in [tissue::CSF, tissue::GM, tissue::WM] {
        let a = avd(pred, truth, c).ok().map(|v| if absolute_avd { v.abs() } else { v });
        classes.push(ClassScore {
            class_id: c,
            name: tissue::NAMES[c as usize - 1].to_string(),
            dice: dice(pred, truth, c)?,
            hausdorff_mm: hausdorff(pred, truth, c).ok(),
            avd: a,
        });
    }
    Ok(SegScore { classes })
}
