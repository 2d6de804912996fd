//! WebAssembly bindings behind `www/index.html`.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use visage_core::preprocess::{estimate_similarity, CANONICAL_LANDMARKS};
use visage_core::trainer::derive_rng;
use visage_core::verification::{contiguous_folds, kfold_accuracy, roc_curve, tar_at_far, ScoreSet, ScoredPair};
use wasm_bindgen::prelude::*;

fn js_err(e: visage_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Canonical five-point targets in the 112×96 frame as `[x1, y1, ..., x5, y5]`.
#[wasm_bindgen]
pub fn canonical_landmarks() -> Vec<f64> {
    CANONICAL_LANDMARKS.points.iter().flatten().copied().collect()
}

#[wasm_bindgen]
pub struct AlignmentResult {
    scale: f64,
    rotation: f64,
    tx: f64,
    ty: f64,
    residual: f64,
    mapped: Vec<f64>,
}

#[wasm_bindgen]
impl AlignmentResult {
    #[wasm_bindgen(getter)]
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Radians.
    #[wasm_bindgen(getter)]
    pub fn rotation(&self) -> f64 {
        self.rotation
    }

    #[wasm_bindgen(getter)]
    pub fn tx(&self) -> f64 {
        self.tx
    }

    #[wasm_bindgen(getter)]
    pub fn ty(&self) -> f64 {
        self.ty
    }

    /// RMS landmark error in output pixels.
    #[wasm_bindgen(getter)]
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Source landmarks after the transform, `[x1, y1, ...]`.
    #[wasm_bindgen(getter)]
    pub fn mapped(&self) -> Vec<f64> {
        self.mapped.clone()
    }
}

/// Fits the similarity taking five detected points onto the canonical frame.
#[wasm_bindgen]
pub fn align_landmarks(points: &[f64]) -> Result<AlignmentResult, JsError> {
    if points.len() != 10 {
        return Err(JsError::new("expected 10 coordinates"));
    }
    let src: Vec<[f64; 2]> = points.chunks_exact(2).map(|p| [p[0], p[1]]).collect();
    let fit = estimate_similarity(&src, &CANONICAL_LANDMARKS.points).map_err(js_err)?;
    let t = fit.transform;
    Ok(AlignmentResult {
        scale: t.scale(),
        rotation: t.rotation(),
        tx: t.tx,
        ty: t.ty,
        residual: fit.residual,
        mapped: src.iter().flat_map(|&p| t.apply(p)).collect(),
    })
}

#[wasm_bindgen]
pub struct RocSummary {
    tar: f64,
    accuracy: f64,
    points: Vec<f64>,
}

#[wasm_bindgen]
impl RocSummary {
    /// TAR at the requested FAR.
    #[wasm_bindgen(getter)]
    pub fn tar(&self) -> f64 {
        self.tar
    }

    /// Ten-fold verification accuracy.
    #[wasm_bindgen(getter)]
    pub fn accuracy(&self) -> f64 {
        self.accuracy
    }

    /// Curve as `[far1, tar1, far2, tar2, ...]`.
    #[wasm_bindgen(getter)]
    pub fn points(&self) -> Vec<f64> {
        self.points.clone()
    }
}

/// Scores `pairs` synthetic pairs, half genuine, with genuine scores shifted
/// by `separation` standard deviations, then reports the ROC, TAR at
/// `far_target` and ten-fold accuracy.
#[wasm_bindgen]
pub fn explore_roc(separation: f64, pairs: usize, far_target: f64, seed: u64) -> Result<RocSummary, JsError> {
    if pairs < 20 {
        return Err(JsError::new("need at least 20 pairs"));
    }
    let normal = Normal::new(0.0, 1.0).map_err(|e| JsError::new(&e.to_string()))?;
    let mut rng = derive_rng(seed, 0);
    let mut scored: Vec<ScoredPair> = (0..pairs)
        .map(|i| {
            let genuine = i % 2 == 0;
            let shift = if genuine { separation } else { 0.0 };
            ScoredPair { score: normal.sample(&mut rng) + shift, genuine }
        })
        .collect();
    // interleave classes across folds
    for i in (1..scored.len()).rev() {
        let j = rng.random_range(0..=i);
        scored.swap(i, j);
    }
    let scores = ScoreSet::new(scored).map_err(js_err)?;
    let roc = roc_curve(&scores).map_err(js_err)?;
    let folds = contiguous_folds(scores.len(), 10).map_err(js_err)?;
    let accuracy = kfold_accuracy(&scores, &folds).map_err(js_err)?.mean;
    Ok(RocSummary {
        tar: tar_at_far(&roc, far_target),
        accuracy,
        points: roc.points.iter().flat_map(|p| [p.far, p.tar]).collect(),
    })
}
