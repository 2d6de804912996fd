//! 3×3, stride-1, padding-1 convolution kernels (im2col + GEMM).

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{Real, Tensor};

pub const KERNEL: usize = 3;
const TAPS: usize = KERNEL * KERNEL;

/// Weights `[out, in, 3, 3]` and bias `[out]` of one convolution layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams<T: Real = f32> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> ConvParams<T> {
    /// Fan-in scaled normal weights (std = √(2/fan_in)), zero bias.
    pub fn init(in_channels: usize, out_channels: usize, rng: &mut impl Rng) -> Self {
        let fan_in = in_channels * TAPS;
        let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
        let weights = Tensor::from_fn(&[out_channels, in_channels, KERNEL, KERNEL], |_| {
            T::lit(normal.sample(rng))
        });
        Self { weights, bias: Tensor::zeros(&[out_channels]) }
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape()[0]
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvDims {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub k: usize,
}

impl ConvDims {
    fn plane(&self) -> usize {
        self.h * self.w
    }
}

/// Unfolds one `[C, H, W]` sample into `[C·9, H·W]` patch columns.
fn im2col<T: Real>(x: &[T], c: usize, h: usize, w: usize, cols: &mut [T]) {
    let hw = h * w;
    for ch in 0..c {
        let src = &x[ch * hw..(ch + 1) * hw];
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = (ch * TAPS + ky * KERNEL + kx) * hw;
                let dst = &mut cols[row..row + hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    let out = &mut dst[y * w..(y + 1) * w];
                    if sy < 0 || sy >= h as isize {
                        out.fill(T::zero());
                        continue;
                    }
                    let line = &src[sy as usize * w..(sy as usize + 1) * w];
                    for (x, o) in out.iter_mut().enumerate() {
                        let sx = x as isize + kx as isize - 1;
                        *o = if sx < 0 || sx >= w as isize { T::zero() } else { line[sx as usize] };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters patch columns back onto the image, accumulating.
fn col2im_add<T: Real>(cols: &[T], c: usize, h: usize, w: usize, dx: &mut [T]) {
    let hw = h * w;
    for ch in 0..c {
        let dst = &mut dx[ch * hw..(ch + 1) * hw];
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = (ch * TAPS + ky * KERNEL + kx) * hw;
                let src = &cols[row..row + hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let line = &mut dst[sy as usize * w..(sy as usize + 1) * w];
                    for x in 0..w {
                        let sx = x as isize + kx as isize - 1;
                        if sx >= 0 && sx < w as isize {
                            line[sx as usize] += src[y * w + x];
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn forward<T: Real>(x: &[T], d: ConvDims, weights: &[T], bias: &[T]) -> Vec<T> {
    let hw = d.plane();
    let patch = d.c * TAPS;
    let mut out = vec![T::zero(); d.n * d.k * hw];
    let mut cols = vec![T::zero(); patch * hw];
    for s in 0..d.n {
        im2col(&x[s * d.c * hw..(s + 1) * d.c * hw], d.c, d.h, d.w, &mut cols);
        let y = &mut out[s * d.k * hw..(s + 1) * d.k * hw];
        for (ko, plane) in y.chunks_mut(hw).enumerate() {
            plane.fill(bias[ko]);
        }
        T::gemm(d.k, patch, hw, T::one(), weights, (patch as isize, 1), &cols, (hw as isize, 1), T::one(), y, (hw as isize, 1));
    }
    out
}

pub(crate) struct ConvGrads<T> {
    pub input: Option<Vec<T>>,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

pub(crate) fn backward<T: Real>(
    x: &[T],
    d: ConvDims,
    weights: &[T],
    upstream: &[T],
    need_input: bool,
) -> ConvGrads<T> {
    let hw = d.plane();
    let patch = d.c * TAPS;
    let mut dw = vec![T::zero(); d.k * patch];
    let mut db = vec![T::zero(); d.k];
    let mut dx = need_input.then(|| vec![T::zero(); x.len()]);
    let mut cols = vec![T::zero(); patch * hw];
    let mut dcols = vec![T::zero(); patch * hw];
    for s in 0..d.n {
        let g = &upstream[s * d.k * hw..(s + 1) * d.k * hw];
        for (ko, plane) in g.chunks(hw).enumerate() {
            db[ko] += plane.iter().copied().sum::<T>();
        }
        im2col(&x[s * d.c * hw..(s + 1) * d.c * hw], d.c, d.h, d.w, &mut cols);
        // dW += G · colsᵀ
        T::gemm(d.k, hw, patch, T::one(), g, (hw as isize, 1), &cols, (1, hw as isize), T::one(), &mut dw, (patch as isize, 1));
        if let Some(dx) = dx.as_mut() {
            // dcols = Wᵀ · G
            T::gemm(patch, d.k, hw, T::one(), weights, (1, patch as isize), g, (hw as isize, 1), T::zero(), &mut dcols, (hw as isize, 1));
            col2im_add(&dcols, d.c, d.h, d.w, &mut dx[s * d.c * hw..(s + 1) * d.c * hw]);
        }
    }
    ConvGrads { input: dx, weights: dw, bias: db }
}
