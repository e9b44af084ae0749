//! Brain tissue segmentation from atlases: probabilistic atlas and tissue
//! intensity models, single-atlas label propagation, and multi-atlas label
//! fusion by majority vote or mutual-information weights.

mod fusion;
mod pipeline;
mod probabilistic;
mod tissue_model;

pub use fusion::{foreground_mask, fuse_majority, fuse_mi_weighted, mi_weights, segment_label_propagation, AtlasEntry};
pub use pipeline::{
    leave_one_out, prepare_case, segment_case, BrainCase, CaseSegmentation, PreparedCase, SegmentationConfig,
    SegmentationMethod,
};
pub use probabilistic::{argmax_priors, build_probabilistic_atlas, ProbabilisticAtlas, TISSUE_CLASSES};
pub use tissue_model::{build_tissue_models, segment_posterior, segment_tissue_model, TissueModel};
