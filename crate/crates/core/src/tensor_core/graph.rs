//! Tape that records forward operations and replays them in reverse.

use super::activation::{self, PreluParams};
use super::conv::{self, ConvDims, ConvParams, KERNEL};
use super::loss::{self, CenterState};
use super::norm::{self, FeatureNormState, NormCache};
use super::{linear, pool, Real, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Conv { input: Var, weights: Var, bias: Var, dims: ConvDims },
    MaxPool { input: Var, argmax: Vec<usize> },
    Prelu { input: Var, slopes: Var },
    Linear { input: Var, weights: Var, bias: Var },
    Add { lhs: Var, rhs: Var },
    Reshape { input: Var },
    FeatureNorm { input: Var, cache: NormCache<T> },
    CrossEntropy { logits: Var, probs: Vec<T>, labels: Vec<usize> },
    CenterLoss { features: Var, offsets: Vec<T>, lambda: f64 },
    Sum { input: Var },
    WeightedSum { input: Var, coeffs: Vec<T> },
    Scale { input: Var, factor: T },
}

#[derive(Debug)]
struct Node<T: Real> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Handles for the two `conv → PReLU` stages inside a residual block.
#[derive(Debug, Clone, Copy)]
pub struct ConvPreluVars {
    pub weights: Var,
    pub bias: Var,
    pub slopes: Var,
}

#[derive(Debug)]
pub struct Graph<T: Real = f32> {
    nodes: Vec<Node<T>>,
    backward_done: bool,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new(), backward_done: false }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn check(&self, v: Var) -> Result<()> {
        if v.0 < self.nodes.len() {
            Ok(())
        } else {
            Err(Error::Usage(format!("variable {} is not on this graph", v.0)))
        }
    }

    /// Records a constant leaf; no gradient is accumulated for it.
    pub fn input(&mut self, value: Tensor<T>) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, requires_grad: false });
        Var(self.nodes.len() - 1)
    }

    /// Records a trainable leaf whose gradient slot is filled by [`Graph::backward`].
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, requires_grad: true });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.nodes[v.0].value.grad()
    }

    /// Clears every gradient slot so backward may run again.
    pub fn reset_grads(&mut self) {
        for node in &mut self.nodes {
            node.value.clear_grad();
        }
        self.backward_done = false;
    }

    pub fn conv2d(&mut self, input: Var, weights: Var, bias: Var) -> Result<Var> {
        let (x, w, b) = (self.value(input), self.value(weights), self.value(bias));
        if x.rank() != 4 {
            return Err(Error::shape("conv2d", format!("input must be [N, C, H, W], got {:?}", x.shape())));
        }
        let ws = w.shape();
        if ws.len() != 4 || ws[2] != KERNEL || ws[3] != KERNEL {
            return Err(Error::shape("conv2d", format!("weights must be [K, C, 3, 3], got {ws:?}")));
        }
        if ws[1] != x.shape()[1] {
            return Err(Error::shape(
                "conv2d",
                format!("input has {} channels but weights expect {}", x.shape()[1], ws[1]),
            ));
        }
        if b.shape() != [ws[0]] {
            return Err(Error::shape("conv2d", format!("bias {:?} for {} kernels", b.shape(), ws[0])));
        }
        let s = x.shape();
        let dims = ConvDims { n: s[0], c: s[1], h: s[2], w: s[3], k: ws[0] };
        let out = conv::forward(x.data(), dims, w.data(), b.data());
        let value = Tensor::new(&[dims.n, dims.k, dims.h, dims.w], out)?;
        Ok(self.push(value, Op::Conv { input, weights, bias, dims }, &[input, weights, bias]))
    }

    pub fn maxpool2d(&mut self, input: Var) -> Result<Var> {
        let x = self.value(input);
        if x.rank() != 4 {
            return Err(Error::shape("maxpool2d", format!("input must be [N, C, H, W], got {:?}", x.shape())));
        }
        let s = x.shape().to_vec();
        let (out, argmax) = pool::forward(x.data(), s[0] * s[1], s[2], s[3]);
        let shape = [s[0], s[1], pool::output_extent(s[2]), pool::output_extent(s[3])];
        let value = Tensor::new(&shape, out)?;
        Ok(self.push(value, Op::MaxPool { input, argmax }, &[input]))
    }

    /// `max(x, 0) + λ_c·min(x, 0)` with channel axis 1.
    pub fn prelu(&mut self, input: Var, slopes: Var) -> Result<Var> {
        let (x, a) = (self.value(input), self.value(slopes));
        if x.rank() < 2 || a.shape() != [x.shape()[1]] {
            return Err(Error::shape(
                "prelu",
                format!("slopes {:?} for input {:?}", a.shape(), x.shape()),
            ));
        }
        let out = activation::prelu_forward(x.data(), x.shape()[1], activation::plane_len(x.shape()), a.data());
        let value = Tensor::new(x.shape(), out)?;
        Ok(self.push(value, Op::Prelu { input, slopes }, &[input, slopes]))
    }

    /// `x·W + b` for `x: [N, D]`, `W: [D, M]`, `b: [M]`.
    pub fn linear(&mut self, input: Var, weights: Var, bias: Var) -> Result<Var> {
        let (x, w, b) = (self.value(input), self.value(weights), self.value(bias));
        if x.rank() != 2 || w.rank() != 2 || x.shape()[1] != w.shape()[0] {
            return Err(Error::shape(
                "fully_connected",
                format!("input {:?} against weights {:?}", x.shape(), w.shape()),
            ));
        }
        let (n, d, m) = (x.shape()[0], x.shape()[1], w.shape()[1]);
        if b.shape() != [m] {
            return Err(Error::shape("fully_connected", format!("bias {:?} for {m} outputs", b.shape())));
        }
        let out = linear::forward(x.data(), n, d, w.data(), b.data(), m);
        let value = Tensor::new(&[n, m], out)?;
        Ok(self.push(value, Op::Linear { input, weights, bias }, &[input, weights, bias]))
    }

    pub fn add(&mut self, lhs: Var, rhs: Var) -> Result<Var> {
        let (a, b) = (self.value(lhs), self.value(rhs));
        if a.shape() != b.shape() {
            return Err(Error::shape("add", format!("{:?} + {:?}", a.shape(), b.shape())));
        }
        let out = a.data().iter().zip(b.data()).map(|(&p, &q)| p + q).collect();
        let value = Tensor::new(a.shape(), out)?;
        Ok(self.push(value, Op::Add { lhs, rhs }, &[lhs, rhs]))
    }

    pub fn reshape(&mut self, input: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(input).clone().reshape(shape)?;
        Ok(self.push(value, Op::Reshape { input }, &[input]))
    }

    /// Collapses `[N, ...]` to `[N, D]`.
    pub fn flatten(&mut self, input: Var) -> Result<Var> {
        let s = self.value(input).shape();
        let n = s[0];
        let d = s[1..].iter().product::<usize>().max(1);
        self.reshape(input, &[n, d])
    }

    /// `x + CoPr(CoPr(x))`, each CoPr being a 3×3 convolution followed by PReLU.
    pub fn residual_block(&mut self, input: Var, inner: [ConvPreluVars; 2]) -> Result<Var> {
        let mut h = input;
        for stage in inner {
            h = self.conv2d(h, stage.weights, stage.bias)?;
            h = self.prelu(h, stage.slopes)?;
        }
        if self.value(h).shape() != self.value(input).shape() {
            return Err(Error::shape(
                "residual_block",
                format!("inner path maps {:?} to {:?}", self.value(input).shape(), self.value(h).shape()),
            ));
        }
        self.add(input, h)
    }

    /// Normalizes each feature column; train mode also updates the running statistics.
    pub fn feature_norm(&mut self, input: Var, state: &mut FeatureNormState<T>) -> Result<Var> {
        let x = self.value(input);
        let (out, cache) = norm::forward(x, state)?;
        let value = Tensor::new(x.shape(), out)?;
        Ok(self.push(value, Op::FeatureNorm { input, cache }, &[input]))
    }

    /// Batch-mean negative log-likelihood of `labels` under `softmax(logits)`.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let (loss, probs) = loss::cross_entropy(self.value(logits), labels)?;
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy { logits, probs, labels: labels.to_vec() },
            &[logits],
        ))
    }

    /// Classifier layer followed by [`Graph::cross_entropy`].
    pub fn softmax_cross_entropy(
        &mut self,
        features: Var,
        weights: Var,
        bias: Var,
        labels: &[usize],
    ) -> Result<Var> {
        let logits = self.linear(features, weights, bias)?;
        self.cross_entropy(logits, labels)
    }

    /// `λ/2 · mean ‖f − c_y‖²` against the current centers. The centers are
    /// constants here; move them with [`CenterState::update`].
    pub fn center_loss(&mut self, features: Var, labels: &[usize], state: &CenterState<T>) -> Result<Var> {
        let (loss, offsets) = loss::center_loss(self.value(features), labels, state)?;
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CenterLoss { features, offsets, lambda: state.lambda },
            &[features],
        ))
    }

    pub fn sum(&mut self, input: Var) -> Var {
        let total = self.value(input).data().iter().copied().sum();
        self.push(Tensor::scalar(total), Op::Sum { input }, &[input])
    }

    /// `Σ x_i·c_i` against constant coefficients of the same shape.
    pub fn weighted_sum(&mut self, input: Var, coeffs: &Tensor<T>) -> Result<Var> {
        let x = self.value(input);
        if x.shape() != coeffs.shape() {
            return Err(Error::shape("weighted_sum", format!("{:?} against {:?}", x.shape(), coeffs.shape())));
        }
        let total = x.data().iter().zip(coeffs.data()).map(|(&a, &c)| a * c).sum();
        let coeffs = coeffs.data().to_vec();
        Ok(self.push(Tensor::scalar(total), Op::WeightedSum { input, coeffs }, &[input]))
    }

    pub fn scale(&mut self, input: Var, factor: T) -> Var {
        let value = self.value(input).map(|v| v * factor);
        self.push(value, Op::Scale { input, factor }, &[input])
    }

    /// Propagates `d loss / d node` to every recorded node and stores the
    /// result in the gradient slots of trainable leaves.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        self.check(loss)?;
        if self.backward_done {
            return Err(Error::Usage("backward already ran on this graph; call reset_grads first".into()));
        }
        let root = &self.nodes[loss.0];
        if root.value.len() != 1 {
            return Err(Error::Usage(format!("loss must be a scalar, got shape {:?}", root.value.shape())));
        }
        if matches!(root.op, Op::Leaf) {
            return Err(Error::Usage("backward called on a leaf: no forward pass recorded".into()));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![T::one()]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            for (target, delta) in self.local_grads(i, &g) {
                if !self.nodes[target.0].requires_grad {
                    continue;
                }
                match &mut grads[target.0] {
                    Some(acc) => acc.iter_mut().zip(&delta).for_each(|(a, d)| *a += *d),
                    slot @ None => *slot = Some(delta),
                }
            }
            if matches!(self.nodes[i].op, Op::Leaf) {
                self.nodes[i].value.set_grad(g)?;
            }
        }
        self.backward_done = true;
        Ok(())
    }

    /// Smallest `|x|` entering any recorded PReLU; distance to the nearest kink.
    pub(crate) fn preactivation_gap(&self) -> f64 {
        self.nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::Prelu { input, .. } => Some(input),
                _ => None,
            })
            .flat_map(|v| self.value(v).data().iter().map(|x| x.as_f64().abs()))
            .fold(f64::INFINITY, f64::min)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn local_grads(&self, i: usize, g: &[T]) -> Vec<(Var, Vec<T>)> {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => Vec::new(),
            Op::Conv { input, weights, bias, dims } => {
                let grads = conv::backward(
                    self.value(*input).data(),
                    *dims,
                    self.value(*weights).data(),
                    g,
                    self.needs(*input),
                );
                let mut out = vec![(*weights, grads.weights), (*bias, grads.bias)];
                if let Some(dx) = grads.input {
                    out.push((*input, dx));
                }
                out
            }
            Op::MaxPool { input, argmax } => {
                vec![(*input, pool::backward(self.value(*input).len(), argmax, g))]
            }
            Op::Prelu { input, slopes } => {
                let x = self.value(*input);
                let (dx, ds) = activation::prelu_backward(
                    x.data(),
                    x.shape()[1],
                    activation::plane_len(x.shape()),
                    self.value(*slopes).data(),
                    g,
                );
                vec![(*input, dx), (*slopes, ds)]
            }
            Op::Linear { input, weights, bias } => {
                let (x, w) = (self.value(*input), self.value(*weights));
                let (n, d, m) = (x.shape()[0], x.shape()[1], w.shape()[1]);
                let grads = linear::backward(x.data(), n, d, w.data(), m, g, self.needs(*input));
                let mut out = vec![(*weights, grads.weights), (*bias, grads.bias)];
                if let Some(dx) = grads.input {
                    out.push((*input, dx));
                }
                out
            }
            Op::Add { lhs, rhs } => vec![(*lhs, g.to_vec()), (*rhs, g.to_vec())],
            Op::Reshape { input } => vec![(*input, g.to_vec())],
            Op::FeatureNorm { input, cache } => {
                let d = self.value(*input).shape()[1];
                vec![(*input, norm::backward(cache, d, g))]
            }
            Op::CrossEntropy { logits, probs, labels } => {
                vec![(*logits, loss::cross_entropy_backward(probs, labels, g[0]))]
            }
            Op::CenterLoss { features, offsets, lambda } => {
                let n = self.value(*features).shape()[0];
                let scale = g[0] * T::lit(*lambda / n as f64);
                vec![(*features, offsets.iter().map(|&o| o * scale).collect())]
            }
            Op::Sum { input } => vec![(*input, vec![g[0]; self.value(*input).len()])],
            Op::WeightedSum { input, coeffs } => vec![(*input, coeffs.iter().map(|&c| c * g[0]).collect())],
            Op::Scale { input, factor } => vec![(*input, g.iter().map(|&v| v * *factor).collect())],
        }
    }
}

/// Registers conv and PReLU parameters of one CoPr stage as trainable leaves.
pub fn record_conv_prelu<T: Real>(
    graph: &mut Graph<T>,
    conv: &ConvParams<T>,
    prelu: &PreluParams<T>,
) -> ConvPreluVars {
    ConvPreluVars {
        weights: graph.param(conv.weights.clone()),
        bias: graph.param(conv.bias.clone()),
        slopes: graph.param(prelu.slopes.clone()),
    }
}
