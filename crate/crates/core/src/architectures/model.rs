use rand::Rng;

use super::spec::{shape_trace, ArchitectureSpec, LayerKind, TracedShape};
use crate::error::{Error, Result};
use crate::tensor_core::{
    Checkpoint, ConvParams, ConvPreluVars, FcParams, FeatureNormState, Graph, NormMode,
    PreluParams, Real, Tensor, Var,
};

/// Which representation [`Model::features`] returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureTap {
    /// Output of the feature-normalization layer (the FC output when none).
    #[default]
    PostNorm,
    /// Raw FC output.
    PreNorm,
}

/// Optimizer-relevant role of a parameter tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
    Slope,
}

impl ParamKind {
    pub fn decays(self) -> bool {
        !matches!(self, ParamKind::Slope)
    }
}

pub struct ParamMut<'a, T: Real> {
    pub name: String,
    pub kind: ParamKind,
    pub tensor: &'a mut Tensor<T>,
}

#[derive(Debug, Clone)]
struct CoPr<T: Real> {
    conv: ConvParams<T>,
    prelu: PreluParams<T>,
}

#[derive(Debug, Clone)]
enum Layer<T: Real> {
    ConvPrelu(CoPr<T>),
    Residual([CoPr<T>; 2]),
    MaxPool,
    Fc(FcParams<T>),
    Norm(FeatureNormState<T>),
    Head(FcParams<T>),
}

/// Graph handles produced by one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub pre_norm: Var,
    pub features: Var,
    pub logits: Option<Var>,
    /// Parameter leaves in [`Model::params_mut`] order.
    pub params: Vec<Var>,
}

/// Parameters and normalization state instantiated from an [`ArchitectureSpec`].
#[derive(Debug, Clone)]
pub struct Model<T: Real = f32> {
    spec: ArchitectureSpec,
    layers: Vec<Layer<T>>,
}

impl<T: Real> Model<T> {
    pub fn new(spec: ArchitectureSpec, rng: &mut impl Rng) -> Result<Self> {
        let trace = shape_trace(&spec)?;
        let mut layers = Vec::new();
        for (i, entry) in spec.layers.iter().enumerate() {
            let before = trace[i];
            let channels = match before {
                TracedShape::Maps { channels, .. } => channels,
                TracedShape::Flat(d) => d,
            };
            match entry.kind {
                LayerKind::ConvPrelu => {
                    let mut c_in = channels;
                    for _ in 0..entry.replication {
                        layers.push(Layer::ConvPrelu(CoPr {
                            conv: ConvParams::init(c_in, entry.width, rng),
                            prelu: PreluParams::new(entry.width),
                        }));
                        c_in = entry.width;
                    }
                }
                LayerKind::ResidualBlock => {
                    for _ in 0..entry.replication {
                        let stage = |rng: &mut _| CoPr {
                            conv: ConvParams::init(entry.width, entry.width, rng),
                            prelu: PreluParams::new(entry.width),
                        };
                        let first = stage(rng);
                        layers.push(Layer::Residual([first, stage(rng)]));
                    }
                }
                LayerKind::MaxPool => layers.extend((0..entry.replication).map(|_| Layer::MaxPool)),
                LayerKind::FullyConnected => layers.push(Layer::Fc(FcParams::init(before.elements(), entry.width, rng))),
                LayerKind::FeatureNorm => layers.push(Layer::Norm(FeatureNormState::new(entry.width))),
                LayerKind::ClassifierHead => layers.push(Layer::Head(FcParams::init(before.elements(), entry.width, rng))),
            }
        }
        if !layers.iter().any(|l| matches!(l, Layer::Fc(_))) {
            return Err(Error::Invalid("architecture needs a fully connected feature layer".into()));
        }
        Ok(Self { spec, layers })
    }

    pub fn spec(&self) -> &ArchitectureSpec {
        &self.spec
    }

    pub fn set_mode(&mut self, mode: NormMode) {
        for layer in &mut self.layers {
            if let Layer::Norm(state) = layer {
                state.mode = mode;
            }
        }
    }

    pub fn feature_norm(&self) -> Option<&FeatureNormState<T>> {
        self.layers.iter().find_map(|l| match l {
            Layer::Norm(s) => Some(s),
            _ => None,
        })
    }

    pub fn feature_norm_mut(&mut self) -> Option<&mut FeatureNormState<T>> {
        self.layers.iter_mut().find_map(|l| match l {
            Layer::Norm(s) => Some(s),
            _ => None,
        })
    }

    /// Records the network on `graph`. With `trainable`, parameters become
    /// gradient-carrying leaves listed in [`ForwardPass::params`].
    pub fn forward(&mut self, graph: &mut Graph<T>, input: Var, trainable: bool) -> Result<ForwardPass> {
        let expected = self.spec.input_shape;
        let got = graph.value(input).shape();
        if got.len() != 4 || got[1..] != expected {
            return Err(Error::shape("model", format!("input {got:?} does not match [N, {expected:?}]")));
        }
        let leaf = |g: &mut Graph<T>, t: &Tensor<T>, params: &mut Vec<Var>| {
            let v = if trainable { g.param(t.clone()) } else { g.input(t.clone()) };
            params.push(v);
            v
        };
        let mut params = Vec::new();
        let mut h = input;
        let mut pre_norm = None;
        let mut features = None;
        let mut logits = None;
        for layer in &mut self.layers {
            match layer {
                Layer::ConvPrelu(copr) => {
                    let w = leaf(graph, &copr.conv.weights, &mut params);
                    let b = leaf(graph, &copr.conv.bias, &mut params);
                    let a = leaf(graph, &copr.prelu.slopes, &mut params);
                    h = graph.conv2d(h, w, b)?;
                    h = graph.prelu(h, a)?;
                }
                Layer::Residual(stages) => {
                    let vars = [0, 1].map(|i| ConvPreluVars {
                        weights: leaf(graph, &stages[i].conv.weights, &mut params),
                        bias: leaf(graph, &stages[i].conv.bias, &mut params),
                        slopes: leaf(graph, &stages[i].prelu.slopes, &mut params),
                    });
                    h = graph.residual_block(h, vars)?;
                }
                Layer::MaxPool => h = graph.maxpool2d(h)?,
                Layer::Fc(fc) => {
                    let w = leaf(graph, &fc.weights, &mut params);
                    let b = leaf(graph, &fc.bias, &mut params);
                    if graph.value(h).rank() != 2 {
                        h = graph.flatten(h)?;
                    }
                    h = graph.linear(h, w, b)?;
                    pre_norm = Some(h);
                    features = Some(h);
                }
                Layer::Norm(state) => {
                    h = graph.feature_norm(h, state)?;
                    features = Some(h);
                }
                Layer::Head(fc) => {
                    let w = leaf(graph, &fc.weights, &mut params);
                    let b = leaf(graph, &fc.bias, &mut params);
                    logits = Some(graph.linear(h, w, b)?);
                }
            }
        }
        let pre_norm = pre_norm.expect("validated at construction");
        Ok(ForwardPass { pre_norm, features: features.unwrap_or(pre_norm), logits, params })
    }

    /// Inference-only features for a batch `[N, C, H, W]`, one row per sample.
    /// Normalization runs in whatever mode the model is in.
    pub fn features(&mut self, images: &Tensor<T>, tap: FeatureTap) -> Result<Tensor<T>> {
        let mut graph = Graph::new();
        let x = graph.input(images.clone());
        let pass = self.forward(&mut graph, x, false)?;
        let v = match tap {
            FeatureTap::PostNorm => pass.features,
            FeatureTap::PreNorm => pass.pre_norm,
        };
        Ok(graph.value(v).clone())
    }

    /// Inference-only logits.
    pub fn logits(&mut self, images: &Tensor<T>) -> Result<Tensor<T>> {
        let mut graph = Graph::new();
        let x = graph.input(images.clone());
        let pass = self.forward(&mut graph, x, false)?;
        let logits = pass.logits.ok_or_else(|| Error::Invalid("architecture has no classifier head".into()))?;
        Ok(graph.value(logits).clone())
    }

    /// Every trainable tensor with a stable name, in forward order.
    pub fn params_mut(&mut self) -> Vec<ParamMut<'_, T>> {
        let mut out = Vec::new();
        let mut conv_index = 0;
        for layer in &mut self.layers {
            match layer {
                Layer::ConvPrelu(c) => {
                    conv_index += 1;
                    push_copr(&mut out, c, conv_index);
                }
                Layer::Residual([a, b]) => {
                    conv_index += 1;
                    push_copr(&mut out, a, conv_index);
                    conv_index += 1;
                    push_copr(&mut out, b, conv_index);
                }
                Layer::Fc(fc) => push_fc(&mut out, fc, "fc"),
                Layer::Head(fc) => push_fc(&mut out, fc, "head"),
                Layer::MaxPool | Layer::Norm(_) => {}
            }
        }
        out
    }

    pub fn param_elements(&mut self) -> usize {
        self.params_mut().iter().map(|p| p.tensor.len()).sum()
    }
}

fn push_copr<'a, T: Real>(out: &mut Vec<ParamMut<'a, T>>, c: &'a mut CoPr<T>, index: usize) {
    out.push(ParamMut { name: format!("conv{index}.weights"), kind: ParamKind::Weight, tensor: &mut c.conv.weights });
    out.push(ParamMut { name: format!("conv{index}.bias"), kind: ParamKind::Bias, tensor: &mut c.conv.bias });
    out.push(ParamMut { name: format!("prelu{index}.slopes"), kind: ParamKind::Slope, tensor: &mut c.prelu.slopes });
}

fn push_fc<'a, T: Real>(out: &mut Vec<ParamMut<'a, T>>, fc: &'a mut FcParams<T>, prefix: &str) {
    out.push(ParamMut { name: format!("{prefix}.weights"), kind: ParamKind::Weight, tensor: &mut fc.weights });
    out.push(ParamMut { name: format!("{prefix}.bias"), kind: ParamKind::Bias, tensor: &mut fc.bias });
}

const NORM_MEAN: &str = "fn.running_mean";
const NORM_VAR: &str = "fn.running_var";

impl Model<f32> {
    /// Parameters plus normalization statistics. The classifier head is
    /// dataset-specific and only written when `include_head` is set.
    pub fn to_checkpoint(&mut self, include_head: bool) -> Checkpoint {
        let mut ck = Checkpoint::new();
        for p in self.params_mut() {
            if include_head || !p.name.starts_with("head.") {
                ck.push(p.name, p.tensor.clone());
            }
        }
        if let Some(state) = self.feature_norm() {
            let d = state.features();
            ck.push(NORM_MEAN, Tensor::new(&[d], state.running_mean.clone()).expect("length matches"));
            ck.push(NORM_VAR, Tensor::new(&[d], state.running_var.clone()).expect("length matches"));
        }
        ck
    }

    /// Overwrites every tensor named in `ck`. All trunk parameters must be
    /// present; the head may be absent.
    pub fn load_checkpoint(&mut self, ck: &Checkpoint) -> Result<()> {
        for p in self.params_mut() {
            match ck.get(&p.name) {
                Some(t) if t.shape() == p.tensor.shape() => *p.tensor = t.clone(),
                Some(t) => {
                    return Err(Error::shape(
                        "load_checkpoint",
                        format!("{}: checkpoint {:?} vs model {:?}", p.name, t.shape(), p.tensor.shape()),
                    ))
                }
                None if p.name.starts_with("head.") => {}
                None => return Err(Error::format("checkpoint", format!("missing record {:?}", p.name))),
            }
        }
        if let Some(state) = self.feature_norm_mut() {
            let (Some(mean), Some(var)) = (ck.get(NORM_MEAN), ck.get(NORM_VAR)) else {
                return Err(Error::format("checkpoint", "missing feature-normalization statistics"));
            };
            if mean.len() != state.features() || var.len() != state.features() {
                return Err(Error::shape("load_checkpoint", "feature-normalization statistics width"));
            }
            state.running_mean = mean.data().to_vec();
            state.running_var = var.data().to_vec();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::architectures::{build_mnist2d, build_mnist2d_with, param_count, Mnist2dConfig};

    fn small() -> ArchitectureSpec {
        build_mnist2d_with(Mnist2dConfig { widths: [2, 3, 4], ..Default::default() })
    }

    #[test]
    fn instantiated_elements_match_param_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let spec = build_mnist2d();
        let count = param_count(&spec).unwrap();
        let mut model = Model::<f32>::new(spec, &mut rng).unwrap();
        assert_eq!(model.param_elements(), count.with_head());
        let slopes = model.params_mut().into_iter().filter(|p| p.kind == ParamKind::Slope).count();
        assert_eq!(slopes, 6);
    }

    #[test]
    fn every_conv_is_followed_by_prelu() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = Model::<f32>::new(small(), &mut rng).unwrap();
        let names: Vec<String> = model.params_mut().into_iter().map(|p| p.name).collect();
        for (i, n) in names.iter().enumerate() {
            if n.ends_with(".weights") && n.starts_with("conv") {
                let idx = &n["conv".len()..n.len() - ".weights".len()];
                assert_eq!(names[i + 2], format!("prelu{idx}.slopes"));
            }
        }
    }

    #[test]
    fn forward_shapes_and_taps() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut model = Model::<f32>::new(small(), &mut rng).unwrap();
        let x = Tensor::from_fn(&[3, 1, 28, 28], |i| ((i % 17) as f32 - 8.0) / 8.0);
        let post = model.features(&x, FeatureTap::PostNorm).unwrap();
        let pre = model.features(&x, FeatureTap::PreNorm).unwrap();
        assert_eq!(post.shape(), &[3, 2]);
        assert_ne!(post.data(), pre.data());
        assert_eq!(model.logits(&x).unwrap().shape(), &[3, 10]);
        let bad = Tensor::<f32>::zeros(&[1, 1, 27, 28]);
        assert!(model.features(&bad, FeatureTap::PostNorm).is_err());
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut model = Model::<f32>::new(small(), &mut rng).unwrap();
        model.feature_norm_mut().unwrap().running_mean = vec![0.125, -3.5];
        let ck = model.to_checkpoint(true);
        let bytes = ck.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes(), bytes);

        let mut other = Model::<f32>::new(small(), &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        other.load_checkpoint(&back).unwrap();
        assert_eq!(other.to_checkpoint(true), ck);

        let trunk = model.to_checkpoint(false);
        assert!(trunk.get("head.weights").is_none());
        assert!(trunk.get("fn.running_var").is_some());
    }
}
