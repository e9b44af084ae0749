//! One function per subcommand. Each writes its outputs under the context's
//! output directory and returns the report it wrote.

use std::path::PathBuf;

mod brain;
mod evaluate;
mod lesion;
mod lung;
mod phantom;

pub use brain::cmd_segment;
pub use evaluate::{cmd_evaluate_classification, cmd_evaluate_segmentation, cmd_evaluate_tre, cmd_transform_points};
pub use lesion::{cmd_classify, cmd_features};
pub use lung::{cmd_preprocess, cmd_register};
pub use phantom::cmd_phantom;

/// Settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Ctx {
    pub out_dir: PathBuf,
    /// Landmark files count voxels from 1.
    pub one_based: bool,
}

/// Mean and sample standard deviation.
pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// "mean ± std" with `digits` decimals, or n/a for no values.
pub(crate) fn pm(values: &[f64], digits: usize) -> String {
    if values.is_empty() {
        return "n/a".into();
    }
    let (m, s) = mean_std(values);
    format!("{m:.digits$} ± {s:.digits$}")
}

/// Lower-case file-name-safe form of a display name.
pub(crate) fn slug(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect();
    s.trim_matches('_').to_string()
}
