//! Deterministic synthetic data with ground truth for every pipeline.

mod brain;
mod lesion;
mod lung;

pub use brain::{
    gen_atlas_population, gen_brain_phantom, gen_brain_suite, random_pose, AffineRanges, AtlasMember, BrainPhantom,
    BrainPhantomConfig, BrainSuiteConfig,
};
pub use lesion::{gen_lesion, gen_lesion_dataset, hue_distance, LesionClassKnobs, LesionDataset, LesionDatasetConfig};
pub use lung::{
    gen_lung_slice, gen_registration_pair, LungSlice, LungSliceConfig, PairConfig, RegistrationPair, SmoothDeformation,
};
