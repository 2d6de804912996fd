//! Face normalization: five-point similarity alignment into a 112×96
//! grayscale frame, with a bounding-box crop when landmarks are missing.

mod align;
mod image;
mod landmarks;
mod similarity;

pub use align::{align_face, crop_resize, fallback_crop, normalize_plane, pixel_normalize, warp, AlignedFace, Provenance};
pub use image::{to_grayscale, Plane, RgbImage};
pub use landmarks::{parse_landmark_manifest, BoundingBox, LandmarkRecord, LandmarkSet, CANONICAL_LANDMARKS};
pub use similarity::{estimate_similarity, Alignment, SimilarityTransform};

/// Output frame height.
pub const FRAME_HEIGHT: usize = 112;
/// Output frame width.
pub const FRAME_WIDTH: usize = 96;

#[cfg(test)]
mod tests;
