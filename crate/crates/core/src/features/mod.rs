//! Handcrafted colour, shape and texture features, plus augmentation.

pub mod augment;
pub mod canny;
pub mod color;
pub mod glcm;
pub mod lbp;
pub mod shape;
pub mod vector;

pub use augment::{augment, AugmentOp, AugmentSpec};
pub use canny::canny;
pub use color::{color_stats, hsv_to_rgb, rgb_to_hsv};
pub use glcm::{glcm_features, GlcmConfig};
pub use lbp::{lbp_features, LbpConfig};
pub use shape::{log_hu_moments, shape_features};
pub use vector::{
    extract_batch, extract_feature_vector, extract_with, feature_names, lesion_mask, FeatureMatrix, FeatureVector,
};
