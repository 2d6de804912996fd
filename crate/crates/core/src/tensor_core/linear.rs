use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{Real, Tensor};

/// Weights `[in, out]` and bias `[out]` of a fully connected layer.
#[derive(Debug, Clone, PartialEq)]
pub struct FcParams<T: Real = f32> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> FcParams<T> {
    pub fn init(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let normal = Normal::new(0.0, (2.0 / inputs as f64).sqrt()).expect("positive std");
        Self {
            weights: Tensor::from_fn(&[inputs, outputs], |_| T::lit(normal.sample(rng))),
            bias: Tensor::zeros(&[outputs]),
        }
    }
}

pub(crate) fn forward<T: Real>(x: &[T], n: usize, d: usize, w: &[T], b: &[T], m: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(n * m);
    for _ in 0..n {
        out.extend_from_slice(b);
    }
    T::gemm(n, d, m, T::one(), x, (d as isize, 1), w, (m as isize, 1), T::one(), &mut out, (m as isize, 1));
    out
}

pub(crate) struct FcGrads<T> {
    pub input: Option<Vec<T>>,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

pub(crate) fn backward<T: Real>(
    x: &[T],
    n: usize,
    d: usize,
    w: &[T],
    m: usize,
    g: &[T],
    need_input: bool,
) -> FcGrads<T> {
    let mut dw = vec![T::zero(); d * m];
    // dW = Xᵀ · G
    T::gemm(d, n, m, T::one(), x, (1, d as isize), g, (m as isize, 1), T::zero(), &mut dw, (m as isize, 1));
    let mut db = vec![T::zero(); m];
    for row in g.chunks(m) {
        for (acc, &v) in db.iter_mut().zip(row) {
            *acc += v;
        }
    }
    let input = need_input.then(|| {
        // dX = G · Wᵀ
        let mut dx = vec![T::zero(); n * d];
        T::gemm(n, m, d, T::one(), g, (m as isize, 1), w, (1, m as isize), T::zero(), &mut dx, (d as isize, 1));
        dx
    });
    FcGrads { input, weights: dw, bias: db }
}
