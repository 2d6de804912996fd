//! Softmax cross-entropy and center-loss kernels.

use super::{Real, Tensor};
use crate::error::{Error, Result};

pub const CENTER_LAMBDA: f64 = 0.003;
pub const CENTER_ALPHA: f64 = 0.5;

/// Returns batch-mean loss and the row-wise softmax probabilities.
pub(crate) fn cross_entropy<T: Real>(logits: &Tensor<T>, labels: &[usize]) -> Result<(T, Vec<T>)> {
    if logits.rank() != 2 {
        return Err(Error::shape("softmax_cross_entropy", format!("logits must be [N, K], got {:?}", logits.shape())));
    }
    let (n, k) = (logits.shape()[0], logits.shape()[1]);
    if labels.len() != n {
        return Err(Error::shape("softmax_cross_entropy", format!("{} labels for {n} rows", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
        return Err(Error::Invalid(format!("label {bad} outside [0, {k})")));
    }
    let mut probs = Vec::with_capacity(n * k);
    let mut total = 0.0f64;
    for (row, &y) in logits.data().chunks(k).zip(labels) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let shifted: Vec<f64> = row.iter().map(|&z| (z - max).as_f64()).collect();
        let norm: f64 = shifted.iter().map(|s| s.exp()).sum();
        let log_norm = norm.ln();
        total += log_norm - shifted[y];
        probs.extend(shifted.iter().map(|s| T::lit((s - log_norm).exp())));
    }
    Ok((T::lit(total / n as f64), probs))
}

pub(crate) fn cross_entropy_backward<T: Real>(probs: &[T], labels: &[usize], upstream: T) -> Vec<T> {
    let n = labels.len();
    let k = probs.len() / n;
    let scale = upstream / T::lit(n as f64);
    let mut dz: Vec<T> = probs.iter().map(|&p| p * scale).collect();
    for (i, &y) in labels.iter().enumerate() {
        dz[i * k + y] -= scale;
    }
    dz
}

/// Per-class feature centers pulled toward their class samples.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterState<T: Real = f32> {
    /// `[num_classes, feature_dim]`
    pub centers: Tensor<T>,
    pub alpha: f64,
    pub lambda: f64,
}

impl<T: Real> CenterState<T> {
    pub fn new(num_classes: usize, feature_dim: usize) -> Self {
        Self::with_rates(num_classes, feature_dim, CENTER_ALPHA, CENTER_LAMBDA)
    }

    pub fn with_rates(num_classes: usize, feature_dim: usize, alpha: f64, lambda: f64) -> Self {
        Self { centers: Tensor::zeros(&[num_classes, feature_dim]), alpha, lambda }
    }

    pub fn num_classes(&self) -> usize {
        self.centers.shape()[0]
    }

    pub fn feature_dim(&self) -> usize {
        self.centers.shape()[1]
    }

    pub fn center(&self, class: usize) -> &[T] {
        let d = self.feature_dim();
        &self.centers.data()[class * d..(class + 1) * d]
    }

    /// Moves every class present in the batch toward its batch mean:
    /// `c ← c + α·(mean − c)`. Classes absent from the batch are untouched.
    pub fn update(&mut self, features: &Tensor<T>, labels: &[usize]) -> Result<()> {
        self.check(features, labels)?;
        let d = self.feature_dim();
        let k = self.num_classes();
        let mut sums = vec![0.0f64; k * d];
        let mut counts = vec![0usize; k];
        for (row, &y) in features.data().chunks(d).zip(labels) {
            counts[y] += 1;
            for (s, v) in sums[y * d..(y + 1) * d].iter_mut().zip(row) {
                *s += v.as_f64();
            }
        }
        let alpha = self.alpha;
        let centers = self.centers.data_mut();
        for class in (0..k).filter(|&c| counts[c] > 0) {
            for j in 0..d {
                let mean = sums[class * d + j] / counts[class] as f64;
                let c = centers[class * d + j].as_f64();
                centers[class * d + j] = T::lit(c + alpha * (mean - c));
            }
        }
        Ok(())
    }

    pub(crate) fn check(&self, features: &Tensor<T>, labels: &[usize]) -> Result<()> {
        if features.rank() != 2 || features.shape()[1] != self.feature_dim() {
            return Err(Error::shape(
                "center_loss",
                format!("features {:?} against centers {:?}", features.shape(), self.centers.shape()),
            ));
        }
        if labels.len() != features.shape()[0] {
            return Err(Error::shape("center_loss", format!("{} labels for {} rows", labels.len(), features.shape()[0])));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= self.num_classes()) {
            return Err(Error::Invalid(format!("label {bad} has no center")));
        }
        Ok(())
    }
}

/// Returns `λ/2 · mean ‖f − c_y‖²` and the offsets `f − c_y`.
pub(crate) fn center_loss<T: Real>(
    features: &Tensor<T>,
    labels: &[usize],
    state: &CenterState<T>,
) -> Result<(T, Vec<T>)> {
    state.check(features, labels)?;
    let d = state.feature_dim();
    let mut offsets = Vec::with_capacity(features.len());
    let mut total = 0.0f64;
    for (row, &y) in features.data().chunks(d).zip(labels) {
        for (&f, &c) in row.iter().zip(state.center(y)) {
            let diff = f - c;
            total += diff.as_f64() * diff.as_f64();
            offsets.push(diff);
        }
    }
    let n = labels.len() as f64;
    Ok((T::lit(state.lambda * 0.5 * total / n), offsets))
}
