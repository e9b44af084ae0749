//! Segmentation, registration and classification metrics.

mod classification;
mod segmentation;
mod tre;

pub use classification::{
    classification_report, cohen_kappa, roc_auc, roc_svg, ClassMetrics, ClassificationReport, ConfusionMatrix, RocPoint,
};
pub use segmentation::{
    avd, boundary_voxels, dice, dice_masks, hausdorff, hausdorff_masks, score_segmentation, ClassScore, SegScore,
};
pub use tre::{format_mean_std, tre, TreSummary};
