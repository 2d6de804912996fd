use std::path::PathBuf;

use crate::error::{Error, Result};

/// Left eye, right eye, nose tip, left mouth corner, right mouth corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandmarkSet {
    pub points: [[f64; 2]; 5],
    /// False when the detector failed and the points carry no information.
    pub detected: bool,
}

/// Default targets in the 112×96 frame, mirror-symmetric about x = 47.5.
pub const CANONICAL_LANDMARKS: LandmarkSet = LandmarkSet {
    points: [[29.9, 51.6], [65.1, 51.6], [47.5, 71.7], [33.1, 92.3], [61.9, 92.3]],
    detected: true,
};

impl LandmarkSet {
    pub fn new(points: [[f64; 2]; 5], detected: bool) -> Result<Self> {
        if detected && points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("landmark coordinates must be finite".into()));
        }
        Ok(Self { points, detected })
    }

    /// Landmarks of the horizontally mirrored image; left and right swap roles.
    pub fn mirrored(&self, image_width: usize) -> Self {
        let edge = image_width as f64 - 1.0;
        let m = |p: [f64; 2]| [edge - p[0], p[1]];
        let p = self.points;
        Self { points: [m(p[1]), m(p[0]), m(p[2]), m(p[4]), m(p[3])], detected: self.detected }
    }
}

/// Axis-aligned box in pixel-edge coordinates: covers `[x, x+w) × [y, y+h)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkRecord {
    pub image_path: PathBuf,
    pub landmarks: LandmarkSet,
    pub bbox: BoundingBox,
}

/// `image_path x1 y1 ... x5 y5 bbox_x bbox_y bbox_w bbox_h detected_flag`, one
/// record per line. Blank lines and `#` comments are skipped.
pub fn parse_landmark_manifest(text: &str) -> Result<Vec<LandmarkRecord>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |detail: String| Error::format("landmark manifest", format!("line {}: {detail}", lineno + 1));
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 16 {
            return Err(bad(format!("expected 16 fields, found {}", fields.len())));
        }
        let nums = fields[1..15]
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| bad(format!("not a number: {f:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let detected = match fields[15] {
            "1" => true,
            "0" => false,
            other => return Err(bad(format!("detected flag must be 0 or 1, got {other:?}"))),
        };
        let mut points = [[0.0; 2]; 5];
        for (i, p) in points.iter_mut().enumerate() {
            *p = [nums[2 * i], nums[2 * i + 1]];
        }
        let landmarks = LandmarkSet::new(points, detected).map_err(|e| bad(e.to_string()))?;
        let bbox = BoundingBox { x: nums[10], y: nums[11], width: nums[12], height: nums[13] };
        out.push(LandmarkRecord { image_path: PathBuf::from(fields[0]), landmarks, bbox });
    }
    Ok(out)
}
