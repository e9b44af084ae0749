//! Intensity normalisation, bias correction and data extraction for brain
//! MRI, plus the lung-CT artifact removal chain (FOV check, K-means, chest
//! hole filling, gantry removal, CLAHE).

mod bias;
mod clahe;
mod ct;
mod extract;
mod normalize;
mod otsu;

pub use bias::{correct_bias, BiasCorrection, BiasFieldConfig};
pub use clahe::{clahe, clip_histogram};
pub use ct::{
    detect_fov, fill_chest_holes, kmeans_1d, kmeans_segment, preprocess_ct_slice, preprocess_ct_volume, remove_gantry,
    ChestMask, CtPreprocessConfig, CtSliceResult, Fov, KMeans1d, KMeansSegmentation,
};
pub use extract::{extract_patches, extract_slices, ExtractionConfig, Patch, SlicePair};
pub use normalize::minmax_normalize;
pub use otsu::{otsu_from_histogram, otsu_threshold, quantize_levels, Otsu};
