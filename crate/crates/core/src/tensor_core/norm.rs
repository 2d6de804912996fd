//! Feature normalization: batch normalization with unit scale and zero shift.

use super::{Real, Tensor};
use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-5;
/// Weight kept by the running statistics on each update.
pub const DEFAULT_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    Train,
    Eval,
}

/// Per-feature running statistics plus the train/eval switch.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureNormState<T: Real = f32> {
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub momentum: f64,
    pub epsilon: f64,
    pub mode: NormMode,
}

impl<T: Real> FeatureNormState<T> {
    pub fn new(features: usize) -> Self {
        Self::with_constants(features, DEFAULT_MOMENTUM, DEFAULT_EPSILON)
    }

    pub fn with_constants(features: usize, momentum: f64, epsilon: f64) -> Self {
        assert!(momentum > 0.0 && momentum < 1.0, "momentum must lie in (0, 1)");
        assert!(epsilon > 0.0, "epsilon must be positive");
        Self {
            running_mean: vec![T::zero(); features],
            running_var: vec![T::one(); features],
            momentum,
            epsilon,
            mode: NormMode::Train,
        }
    }

    pub fn features(&self) -> usize {
        self.running_mean.len()
    }

    pub fn train(&mut self) {
        self.mode = NormMode::Train;
    }

    pub fn eval(&mut self) {
        self.mode = NormMode::Eval;
    }

    pub fn cast<U: Real>(&self) -> FeatureNormState<U> {
        FeatureNormState {
            running_mean: self.running_mean.iter().map(|v| U::lit(v.as_f64())).collect(),
            running_var: self.running_var.iter().map(|v| U::lit(v.as_f64())).collect(),
            momentum: self.momentum,
            epsilon: self.epsilon,
            mode: self.mode,
        }
    }
}

/// Cached quantities for the backward pass.
#[derive(Debug, Clone)]
pub(crate) enum NormCache<T> {
    Train { xhat: Vec<T>, inv_std: Vec<T> },
    Eval { inv_std: Vec<T> },
}

pub(crate) fn forward<T: Real>(
    x: &Tensor<T>,
    state: &mut FeatureNormState<T>,
) -> Result<(Vec<T>, NormCache<T>)> {
    if x.rank() != 2 {
        return Err(Error::shape("feature_norm", format!("expected [N, D], got {:?}", x.shape())));
    }
    let (n, d) = (x.shape()[0], x.shape()[1]);
    if d != state.features() {
        return Err(Error::shape(
            "feature_norm",
            format!("input has {d} features, state tracks {}", state.features()),
        ));
    }
    let data = x.data();
    match state.mode {
        NormMode::Train => {
            if n < 2 {
                return Err(Error::Invalid(
                    "feature_norm in train mode needs a batch of at least two samples".into(),
                ));
            }
            let mut mean = vec![0.0f64; d];
            for row in data.chunks(d) {
                for (m, v) in mean.iter_mut().zip(row) {
                    *m += v.as_f64();
                }
            }
            mean.iter_mut().for_each(|m| *m /= n as f64);
            let mut var = vec![0.0f64; d];
            for row in data.chunks(d) {
                for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                    let c = v.as_f64() - m;
                    *s += c * c;
                }
            }
            var.iter_mut().for_each(|s| *s /= n as f64);
            let inv_std: Vec<T> =
                var.iter().map(|v| T::lit(1.0 / (v + state.epsilon).sqrt())).collect();
            let mean_t: Vec<T> = mean.iter().map(|&m| T::lit(m)).collect();
            let mut xhat = Vec::with_capacity(data.len());
            for row in data.chunks(d) {
                for j in 0..d {
                    xhat.push((row[j] - mean_t[j]) * inv_std[j]);
                }
            }
            let keep = state.momentum;
            let unbias = n as f64 / (n as f64 - 1.0);
            for j in 0..d {
                let rm = state.running_mean[j].as_f64();
                let rv = state.running_var[j].as_f64();
                state.running_mean[j] = T::lit(keep * rm + (1.0 - keep) * mean[j]);
                state.running_var[j] = T::lit(keep * rv + (1.0 - keep) * var[j] * unbias);
            }
            Ok((xhat.clone(), NormCache::Train { xhat, inv_std }))
        }
        NormMode::Eval => {
            let inv_std: Vec<T> = state
                .running_var
                .iter()
                .map(|v| T::lit(1.0 / (v.as_f64() + state.epsilon).sqrt()))
                .collect();
            let mut out = Vec::with_capacity(data.len());
            for row in data.chunks(d) {
                for j in 0..d {
                    out.push((row[j] - state.running_mean[j]) * inv_std[j]);
                }
            }
            Ok((out, NormCache::Eval { inv_std }))
        }
    }
}

pub(crate) fn backward<T: Real>(cache: &NormCache<T>, d: usize, upstream: &[T]) -> Vec<T> {
    match cache {
        NormCache::Eval { inv_std } => upstream
            .chunks(d)
            .flat_map(|row| row.iter().zip(inv_std).map(|(&g, &s)| g * s))
            .collect(),
        NormCache::Train { xhat, inv_std } => {
            let n = upstream.len() / d;
            let mut sum_g = vec![T::zero(); d];
            let mut sum_gx = vec![T::zero(); d];
            for (g_row, x_row) in upstream.chunks(d).zip(xhat.chunks(d)) {
                for j in 0..d {
                    sum_g[j] += g_row[j];
                    sum_gx[j] += g_row[j] * x_row[j];
                }
            }
            let nt = T::lit(n as f64);
            let mut dx = Vec::with_capacity(upstream.len());
            for (g_row, x_row) in upstream.chunks(d).zip(xhat.chunks(d)) {
                for j in 0..d {
                    dx.push(inv_std[j] / nt * (nt * g_row[j] - sum_g[j] - x_row[j] * sum_gx[j]));
                }
            }
            dx
        }
    }
}
