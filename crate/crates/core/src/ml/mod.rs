//! Feature-space learning: scaling, PCA, class balancing, k-NN, MLP and
//! random-forest classifiers, soft-vote ensembles and stratified validation.
//!
//! Samples are rows of equal-length `Vec<f64>` with labels in `0..classes`.

pub mod forest;
pub mod knn;
pub mod mlp;
pub mod model;
pub mod pca;
pub mod pipeline;
pub mod resample;
pub mod scale;
pub mod split;

pub use model::{
    argmax, ensemble_soft_vote, predict_proba, train, ClassifierSpec, ForestSpec, Learned, MlpSpec, TrainedModel,
};
pub use pca::{pca_fit, pca_project, PcaModel};
pub use pipeline::{
    cross_validate, cross_validate_with_extras, fit_pipeline, CvResult, ExtraRow, FittedPipeline, PipelineConfig,
};
pub use resample::{class_counts, class_weights, one_vs_all, smote};
pub use scale::{standardize_apply, standardize_fit, Standardizer};
pub use split::{split, Fold, SplitConfig};
