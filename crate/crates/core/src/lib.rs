//! Classical medical image analysis toolkit.
//!
//! Three pipelines share this crate:
//!
//! * brain MRI tissue segmentation with probabilistic and multi-atlas
//!   methods ([`atlas`]),
//! * intensity-based lung CT registration evaluated by target registration
//!   error ([`registration`], [`preprocess`]),
//! * skin-lesion classification from handcrafted features ([`features`],
//!   [`ml`]).
//!
//! [`phantom`] generates deterministic synthetic data with ground truth for
//! all three, and [`metrics`] scores them.

// `!(x > 0.0)` style checks are how validation rejects NaN alongside bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod atlas;
pub mod error;
pub mod features;
pub mod io;
pub mod metrics;
pub mod ml;
pub mod morphology;
pub mod phantom;
pub mod preprocess;
pub mod registration;
pub mod rng;
pub mod volume;

pub use error::{Error, Result};
pub use volume::{ColorImage, Geometry, LabelVolume, LandmarkSet, ScalarVolume};
