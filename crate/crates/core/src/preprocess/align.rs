use super::image::Plane;
use super::landmarks::{BoundingBox, LandmarkSet};
use super::similarity::{estimate_similarity, SimilarityTransform};
use super::{FRAME_HEIGHT, FRAME_WIDTH};
use crate::error::{Error, Result};

/// `(p − 127.5) / 128`.
pub fn pixel_normalize(p: f32) -> f32 {
    (p - 127.5) / 128.0
}

pub fn normalize_plane(plane: &Plane) -> Plane {
    plane.map(pixel_normalize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Aligned,
    FallbackCrop,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Aligned => "aligned",
            Provenance::FallbackCrop => "fallback_crop",
        }
    }
}

/// A 112×96 normalized grayscale face.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedFace {
    pub pixels: Plane,
    pub provenance: Provenance,
}

/// Output pixel `(x, y)` reads the source at `transform⁻¹(x, y)`; the transform
/// maps source coordinates into the output frame.
pub fn warp(image: &Plane, transform: &SimilarityTransform, height: usize, width: usize) -> Result<Plane> {
    let inv = transform.inverse()?;
    Ok(Plane::from_fn(height, width, |y, x| {
        let [sx, sy] = inv.apply([x as f64, y as f64]);
        image.sample(sx, sy)
    }))
}

/// Crop `bbox` (clamped to the image) and resample it to `height × width`
/// with pixel-center alignment.
pub fn crop_resize(image: &Plane, bbox: &BoundingBox, height: usize, width: usize) -> Result<Plane> {
    if ![bbox.x, bbox.y, bbox.width, bbox.height].iter().all(|v| v.is_finite()) {
        return Err(Error::Invalid("bounding box has non-finite fields".into()));
    }
    if bbox.width <= 0.0 || bbox.height <= 0.0 {
        return Err(Error::Invalid(format!("bounding box has zero area ({} x {})", bbox.width, bbox.height)));
    }
    let x0 = bbox.x.max(0.0);
    let y0 = bbox.y.max(0.0);
    let x1 = (bbox.x + bbox.width).min(image.width() as f64);
    let y1 = (bbox.y + bbox.height).min(image.height() as f64);
    if x1 <= x0 || y1 <= y0 {
        return Err(Error::Invalid("bounding box does not overlap the image".into()));
    }
    let sx = (x1 - x0) / width as f64;
    let sy = (y1 - y0) / height as f64;
    let max_x = image.width() as f64 - 1.0;
    let max_y = image.height() as f64 - 1.0;
    Ok(Plane::from_fn(height, width, |y, x| {
        let src_x = (x0 + (x as f64 + 0.5) * sx - 0.5).clamp(0.0, max_x);
        let src_y = (y0 + (y as f64 + 0.5) * sy - 0.5).clamp(0.0, max_y);
        image.sample(src_x, src_y)
    }))
}

/// Bounding-box path used when landmarks are unavailable.
pub fn fallback_crop(image: &Plane, bbox: &BoundingBox) -> Result<AlignedFace> {
    let crop = crop_resize(image, bbox, FRAME_HEIGHT, FRAME_WIDTH)?;
    Ok(AlignedFace { pixels: normalize_plane(&crop), provenance: Provenance::FallbackCrop })
}

/// Similarity-align detected landmarks onto `canonical`; otherwise crop the box.
pub fn align_face(image: &Plane, landmarks: &LandmarkSet, bbox: &BoundingBox, canonical: &LandmarkSet) -> Result<AlignedFace> {
    if !landmarks.detected {
        return fallback_crop(image, bbox);
    }
    let fit = estimate_similarity(&landmarks.points, &canonical.points)?;
    let warped = warp(image, &fit.transform, FRAME_HEIGHT, FRAME_WIDTH)?;
    Ok(AlignedFace { pixels: normalize_plane(&warped), provenance: Provenance::Aligned })
}
