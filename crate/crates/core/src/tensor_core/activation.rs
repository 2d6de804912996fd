use super::{Real, Tensor};

pub const INITIAL_SLOPE: f64 = 0.25;

/// One trainable negative-branch slope per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct PreluParams<T: Real = f32> {
    pub slopes: Tensor<T>,
}

impl<T: Real> PreluParams<T> {
    pub fn new(channels: usize) -> Self {
        Self { slopes: Tensor::full(&[channels], T::lit(INITIAL_SLOPE)) }
    }
}

/// Channel axis is 1; everything after it is one contiguous plane per channel.
pub(crate) fn plane_len(shape: &[usize]) -> usize {
    shape[2..].iter().product()
}

pub(crate) fn prelu_forward<T: Real>(x: &[T], channels: usize, plane: usize, slopes: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(x.len());
    for (i, chunk) in x.chunks(plane).enumerate() {
        let a = slopes[i % channels];
        out.extend(chunk.iter().map(|&v| if v > T::zero() { v } else { a * v }));
    }
    out
}

pub(crate) fn prelu_backward<T: Real>(
    x: &[T],
    channels: usize,
    plane: usize,
    slopes: &[T],
    upstream: &[T],
) -> (Vec<T>, Vec<T>) {
    let mut dx = Vec::with_capacity(x.len());
    let mut ds = vec![T::zero(); channels];
    for (i, (xc, gc)) in x.chunks(plane).zip(upstream.chunks(plane)).enumerate() {
        let ch = i % channels;
        let a = slopes[ch];
        let mut acc = T::zero();
        for (&v, &g) in xc.iter().zip(gc) {
            if v > T::zero() {
                dx.push(g);
            } else {
                dx.push(a * g);
                acc += v * g;
            }
        }
        ds[ch] += acc;
    }
    (dx, ds)
}
