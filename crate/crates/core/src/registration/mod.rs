//! Pairwise intensity registration: transforms, resampling, metrics and the
//! multi-resolution optimiser.

mod bending;
mod metric;
mod params;
mod register;
mod resample;
mod transform;

pub use bending::bending_energy;
pub use metric::{
    hard_bin, mean_squared_error, mi_from_joint, mutual_information, normalized_cross_correlation, similarity, Metric,
};
pub use params::{validate_sequence, ParameterMap, PresetLibrary, Sampler, TransformKind};
pub use register::{downsample, gaussian_smooth, pyramid_level, register, LevelCost, Registration, StageCosts};
pub use resample::{resample, resample_labels, resample_with_validity, sample_at, Interpolation};
pub use transform::{
    cubic_weights, transform_landmarks, transform_landmarks_to, transform_point, AffineTransform, BsplineTransform,
    Stage, Support, TransformChain,
};
