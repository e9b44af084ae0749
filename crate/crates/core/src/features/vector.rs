//! The 511-value lesion descriptor and its CSV form.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::color::{color_stats, CHANNEL_NAMES, STAT_NAMES};
use super::glcm::{glcm_features, glcm_names, GlcmConfig};
use super::lbp::{lbp_features, lbp_names, LbpConfig};
use super::shape::{shape_features, SHAPE_NAMES};
use crate::error::{Error, Result};
use crate::morphology::{fill_holes, largest_component};
use crate::preprocess::otsu_threshold;
use crate::volume::ColorImage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub names: Vec<String>,
    pub label: Option<usize>,
}

/// Column names: colour, shape, GLCM, LBP.
pub fn feature_names(glcm: &GlcmConfig, lbp: &LbpConfig) -> Vec<String> {
    let mut names = Vec::new();
    for ch in CHANNEL_NAMES {
        for st in STAT_NAMES {
            names.push(format!("color_{ch}_{st}"));
        }
    }
    names.extend(SHAPE_NAMES.iter().map(|s| format!("shape_{s}")));
    names.extend(glcm_names(glcm));
    names.extend(lbp_names(lbp));
    names
}

/// Lesion segmentation for handcrafted features: pixels at or below the Otsu
/// threshold of the luminance, largest component, holes filled.
pub fn lesion_mask(img: &ColorImage) -> Result<Vec<bool>> {
    let (w, h) = (img.width(), img.height());
    let gray = img.luminance();
    let otsu = otsu_threshold(&gray)?;
    let dark: Vec<bool> = gray.data().iter().map(|&v| v <= otsu.threshold).collect();
    let comp = largest_component(&dark, w, h).ok_or_else(|| Error::invalid("no lesion found"))?;
    Ok(fill_holes(&comp, w, h))
}

pub fn extract_feature_vector(img: &ColorImage, mask: &[bool]) -> Result<FeatureVector> {
    extract_with(img, mask, &GlcmConfig::default(), &LbpConfig::default())
}

pub fn extract_with(img: &ColorImage, mask: &[bool], glcm: &GlcmConfig, lbp: &LbpConfig) -> Result<FeatureVector> {
    let (w, h) = (img.width(), img.height());
    let gray = img.luminance();
    let mut values = color_stats(img, mask)?;
    values.extend(shape_features(mask, w, h)?);
    values.extend(glcm_features(&gray, mask, glcm)?);
    values.extend(lbp_features(&gray, mask, lbp)?);
    let names = feature_names(glcm, lbp);
    debug_assert_eq!(values.len(), names.len());
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("feature {} is not finite", names[i])));
    }
    Ok(FeatureVector {
        values,
        names,
        label: None,
    })
}

/// Otsu-segments and describes every image in parallel; row `i` keeps `labels[i]`.
pub fn extract_batch(
    images: &[ColorImage],
    labels: &[Option<usize>],
    glcm: &GlcmConfig,
    lbp: &LbpConfig,
) -> Result<FeatureMatrix> {
    if images.len() != labels.len() {
        return Err(Error::invalid("one label slot per image required"));
    }
    let vectors = images
        .par_iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (img, &label))| {
            let mask = lesion_mask(img).map_err(|e| e.in_case(format!("image {i}")))?;
            let mut v = extract_with(img, &mask, glcm, lbp).map_err(|e| e.in_case(format!("image {i}")))?;
            v.label = label;
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    FeatureMatrix::from_vectors(vectors)
}

/// Rows of equal-length feature vectors sharing one set of column names.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<Option<usize>>,
}

impl FeatureMatrix {
    pub fn from_vectors(vectors: Vec<FeatureVector>) -> Result<Self> {
        let Some(first) = vectors.first() else {
            return Err(Error::invalid("feature matrix needs at least one row"));
        };
        let names = first.names.clone();
        let mut rows = Vec::with_capacity(vectors.len());
        let mut labels = Vec::with_capacity(vectors.len());
        for v in vectors {
            if v.names != names {
                return Err(Error::invalid("feature vectors have different layouts"));
            }
            rows.push(v.values);
            labels.push(v.label);
        }
        Ok(Self { names, rows, labels })
    }

    /// Header of names plus `label`; empty label cells for unlabelled rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = self.names.clone();
        header.push("label".into());
        w.write_record(&header)?;
        for (row, label) in self.rows.iter().zip(&self.labels) {
            let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            rec.push(label.map(|l| l.to_string()).unwrap_or_default());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header.last().map(String::as_str) != Some("label") {
            return Err(Error::format("feature CSV must end with a label column"));
        }
        let names = header[..header.len() - 1].to_vec();
        let (mut rows, mut labels) = (Vec::new(), Vec::new());
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::format(format!("row {}: bad number {s:?}", line + 1)))
            };
            let row = rec.iter().take(names.len()).map(parse).collect::<Result<Vec<_>>>()?;
            let label = match rec.get(names.len()).map(str::trim) {
                None | Some("") => None,
                Some(s) => Some(
                    s.parse()
                        .map_err(|_| Error::format(format!("row {}: bad label", line + 1)))?,
                ),
            };
            rows.push(row);
            labels.push(label);
        }
        Ok(Self { names, rows, labels })
    }
}
