//! 2×2, stride-2 max pooling. Odd extents produce a partial trailing window.

use super::Real;

pub const WINDOW: usize = 2;

pub(crate) fn output_extent(extent: usize) -> usize {
    extent.div_ceil(WINDOW)
}

/// Returns pooled values and, per output, the flat input index of its maximum.
/// Ties go to the first element in row-major order within the window.
pub(crate) fn forward<T: Real>(input: &[T], planes: usize, h: usize, w: usize) -> (Vec<T>, Vec<usize>) {
    let (oh, ow) = (output_extent(h), output_extent(w));
    let mut out = Vec::with_capacity(planes * oh * ow);
    let mut arg = Vec::with_capacity(planes * oh * ow);
    for p in 0..planes {
        let base = p * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + (oy * WINDOW) * w + ox * WINDOW;
                for y in oy * WINDOW..((oy + 1) * WINDOW).min(h) {
                    for x in ox * WINDOW..((ox + 1) * WINDOW).min(w) {
                        let i = base + y * w + x;
                        if input[i] > input[best] {
                            best = i;
                        }
                    }
                }
                out.push(input[best]);
                arg.push(best);
            }
        }
    }
    (out, arg)
}

pub(crate) fn backward<T: Real>(input_len: usize, argmax: &[usize], upstream: &[T]) -> Vec<T> {
    let mut dx = vec![T::zero(); input_len];
    for (&i, &g) in argmax.iter().zip(upstream) {
        dx[i] += g;
    }
    dx
}
