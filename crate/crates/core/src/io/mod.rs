//! File formats: MetaImage volumes, binary PNM images, landmark text files.

mod landmarks;
mod metaimage;
mod pnm;

pub use landmarks::{parse_landmarks, read_landmarks, write_landmarks};
pub use metaimage::{read_labels, read_metaimage, read_volume, write_labels, write_volume, ElementType};
pub use pnm::{read_color, read_gray, read_pnm, write_color, write_gray, Pnm};
