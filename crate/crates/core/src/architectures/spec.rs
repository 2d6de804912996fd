use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tensor_core::{CENTER_ALPHA, CENTER_LAMBDA, KERNEL};

pub const DEEPVISAGE_INPUT: [usize; 3] = [1, 112, 96];
pub const DEEPVISAGE_FEATURE_DIM: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerKind {
    ConvPrelu,
    ResidualBlock,
    MaxPool,
    FullyConnected,
    FeatureNorm,
    ClassifierHead,
}

impl LayerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LayerKind::ConvPrelu => "conv_prelu",
            LayerKind::ResidualBlock => "residual_block",
            LayerKind::MaxPool => "maxpool",
            LayerKind::FullyConnected => "fully_connected",
            LayerKind::FeatureNorm => "feature_norm",
            LayerKind::ClassifierHead => "classifier_head",
        }
    }
}

impl FromStr for LayerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "conv_prelu" => LayerKind::ConvPrelu,
            "residual_block" => LayerKind::ResidualBlock,
            "maxpool" => LayerKind::MaxPool,
            "fully_connected" => LayerKind::FullyConnected,
            "feature_norm" => LayerKind::FeatureNorm,
            "classifier_head" => LayerKind::ClassifierHead,
            other => return Err(Error::format("architecture spec", format!("unknown layer kind {other:?}"))),
        })
    }
}

/// One line of an architecture: `replication` copies of a layer of `width`
/// channels (conv kinds), neurons (dense kinds) or classes (head).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub width: usize,
    pub replication: usize,
}

impl LayerSpec {
    pub fn new(kind: LayerKind, width: usize, replication: usize) -> Self {
        Self { kind, width, replication }
    }

    /// Number of convolution layers this entry expands to.
    pub fn conv_layers(&self) -> usize {
        match self.kind {
            LayerKind::ConvPrelu => self.replication,
            LayerKind::ResidualBlock => 2 * self.replication,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterLossSpec {
    pub lambda: f64,
    pub alpha: f64,
}

impl Default for CenterLossSpec {
    fn default() -> Self {
        Self { lambda: CENTER_LAMBDA, alpha: CENTER_ALPHA }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchitectureSpec {
    /// `[channels, height, width]`
    pub input_shape: [usize; 3],
    pub layers: Vec<LayerSpec>,
    pub feature_dim: usize,
    pub num_classes: usize,
    /// Training attaches a center loss on the feature layer when present.
    pub center_loss: Option<CenterLossSpec>,
}

impl ArchitectureSpec {
    pub fn conv_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::conv_layers).sum()
    }

    pub fn pool_count(&self) -> usize {
        self.count(LayerKind::MaxPool)
    }

    fn count(&self, kind: LayerKind) -> usize {
        self.layers.iter().filter(|l| l.kind == kind).map(|l| l.replication).sum()
    }

    pub fn has_feature_norm(&self) -> bool {
        self.count(LayerKind::FeatureNorm) > 0
    }

    /// Line-oriented text form; see [`FromStr`] for the grammar.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let [c, h, w] = self.input_shape;
        writeln!(out, "input {c} {h} {w}").unwrap();
        writeln!(out, "feature_dim {}", self.feature_dim).unwrap();
        writeln!(out, "num_classes {}", self.num_classes).unwrap();
        if let Some(cl) = self.center_loss {
            writeln!(out, "center_loss {} {}", cl.lambda, cl.alpha).unwrap();
        }
        for l in &self.layers {
            writeln!(out, "{} {} {}", l.kind.as_str(), l.width, l.replication).unwrap();
        }
        out
    }
}

impl fmt::Display for ArchitectureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn parse_num<T: FromStr>(tok: Option<&str>, line: usize) -> Result<T> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::format("architecture spec", format!("line {line}: expected a number")))
}

impl FromStr for ArchitectureSpec {
    type Err = Error;

    /// Header lines `input C H W`, `feature_dim D`, `num_classes K`, optional
    /// `center_loss LAMBDA ALPHA`, then one `kind width replication` per
    /// layer. Blank lines and `#` comments are ignored.
    fn from_str(s: &str) -> Result<Self> {
        let mut input = None;
        let mut feature_dim = None;
        let mut num_classes = None;
        let mut center_loss = None;
        let mut layers = Vec::new();
        for (i, raw) in s.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut toks = line.split_whitespace();
            let key = toks.next().unwrap_or_default();
            match key {
                "input" => {
                    input = Some([parse_num(toks.next(), lineno)?, parse_num(toks.next(), lineno)?, parse_num(toks.next(), lineno)?])
                }
                "feature_dim" => feature_dim = Some(parse_num(toks.next(), lineno)?),
                "num_classes" => num_classes = Some(parse_num(toks.next(), lineno)?),
                "center_loss" => {
                    center_loss = Some(CenterLossSpec {
                        lambda: parse_num(toks.next(), lineno)?,
                        alpha: parse_num(toks.next(), lineno)?,
                    })
                }
                kind => {
                    let kind: LayerKind = kind.parse()?;
                    let width: usize = parse_num(toks.next(), lineno)?;
                    let replication: usize = parse_num(toks.next(), lineno)?;
                    if width == 0 || replication == 0 {
                        return Err(Error::format("architecture spec", format!("line {lineno}: width and replication must be positive")));
                    }
                    layers.push(LayerSpec { kind, width, replication });
                }
            }
            if toks.next().is_some() {
                return Err(Error::format("architecture spec", format!("line {lineno}: trailing tokens")));
            }
        }
        let missing = |what: &str| Error::format("architecture spec", format!("missing {what} header"));
        Ok(Self {
            input_shape: input.ok_or_else(|| missing("input"))?,
            layers,
            feature_dim: feature_dim.ok_or_else(|| missing("feature_dim"))?,
            num_classes: num_classes.ok_or_else(|| missing("num_classes"))?,
            center_loss,
        })
    }
}

/// Activation shape after a layer entry: feature maps or a flat vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TracedShape {
    Maps { channels: usize, height: usize, width: usize },
    Flat(usize),
}

impl TracedShape {
    pub fn elements(&self) -> usize {
        match *self {
            TracedShape::Maps { channels, height, width } => channels * height * width,
            TracedShape::Flat(d) => d,
        }
    }
}

fn trace_error(index: usize, layer: &LayerSpec, detail: String) -> Error {
    Error::shape("shape_trace", format!("layer {index} ({}): {detail}", layer.kind.as_str()))
}

/// Input shape followed by the output shape of every layer entry.
pub fn shape_trace(spec: &ArchitectureSpec) -> Result<Vec<TracedShape>> {
    let [c, h, w] = spec.input_shape;
    if c == 0 || h == 0 || w == 0 {
        return Err(Error::shape("shape_trace", format!("input shape {:?} has a zero extent", spec.input_shape)));
    }
    let mut cur = TracedShape::Maps { channels: c, height: h, width: w };
    let mut trace = vec![cur];
    for (i, layer) in spec.layers.iter().enumerate() {
        cur = match (layer.kind, cur) {
            (LayerKind::ConvPrelu, TracedShape::Maps { height, width, .. }) => {
                TracedShape::Maps { channels: layer.width, height, width }
            }
            (LayerKind::ResidualBlock, TracedShape::Maps { channels, .. }) if channels != layer.width => {
                return Err(trace_error(i, layer, format!("shortcut needs {} input maps, got {channels}", layer.width)));
            }
            (LayerKind::ResidualBlock, maps @ TracedShape::Maps { .. }) => maps,
            (LayerKind::MaxPool, TracedShape::Maps { channels, height, width }) => {
                if channels != layer.width {
                    return Err(trace_error(i, layer, format!("declared {} maps, input has {channels}", layer.width)));
                }
                let (mut height, mut width) = (height, width);
                for _ in 0..layer.replication {
                    height = height.div_ceil(2);
                    width = width.div_ceil(2);
                }
                TracedShape::Maps { channels, height, width }
            }
            (LayerKind::FullyConnected, _) => TracedShape::Flat(layer.width),
            (LayerKind::FeatureNorm, TracedShape::Flat(d)) if d == layer.width => cur,
            (LayerKind::ClassifierHead, TracedShape::Flat(_)) => {
                if layer.width != spec.num_classes {
                    return Err(trace_error(i, layer, format!("head width {} differs from num_classes {}", layer.width, spec.num_classes)));
                }
                TracedShape::Flat(layer.width)
            }
            (_, shape) => return Err(trace_error(i, layer, format!("cannot follow {shape:?}"))),
        };
        if layer.replication > 1 && matches!(layer.kind, LayerKind::FullyConnected | LayerKind::FeatureNorm | LayerKind::ClassifierHead) {
            return Err(trace_error(i, layer, "dense layers cannot be replicated".into()));
        }
        trace.push(cur);
    }
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamCount {
    pub without_head: usize,
    pub head: usize,
}

impl ParamCount {
    pub fn with_head(&self) -> usize {
        self.without_head + self.head
    }
}

fn conv_prelu_params(c_in: usize, c_out: usize) -> usize {
    KERNEL * KERNEL * c_in * c_out + c_out + c_out
}

/// Trainable weights, biases and PReLU slopes. Running normalization
/// statistics are not trainable and are not counted.
pub fn param_count(spec: &ArchitectureSpec) -> Result<ParamCount> {
    let trace = shape_trace(spec)?;
    let mut count = ParamCount { without_head: 0, head: 0 };
    for (i, layer) in spec.layers.iter().enumerate() {
        let before = trace[i];
        match layer.kind {
            LayerKind::ConvPrelu => {
                let TracedShape::Maps { channels, .. } = before else { unreachable!() };
                count.without_head += conv_prelu_params(channels, layer.width)
                    + (layer.replication - 1) * conv_prelu_params(layer.width, layer.width);
            }
            LayerKind::ResidualBlock => {
                count.without_head += layer.replication * 2 * conv_prelu_params(layer.width, layer.width);
            }
            LayerKind::FullyConnected => count.without_head += before.elements() * layer.width + layer.width,
            LayerKind::ClassifierHead => count.head += before.elements() * layer.width + layer.width,
            LayerKind::MaxPool | LayerKind::FeatureNorm => {}
        }
    }
    Ok(count)
}

/// Residual face network on 112×96 grayscale crops: five stages of widening
/// feature maps (32 → 512) separated by four 2×2 max pools, each stage a
/// CoPr followed by residual blocks, then FC-512 and feature normalization.
///
/// Residual blocks per stage are (0, 1, 2, 3, 5): 5 + 2·11 = 27 convolutions
/// and 40,389,600 parameters without the classifier head.
pub fn build_deepvisage(num_classes: usize) -> Result<ArchitectureSpec> {
    if num_classes < 2 {
        return Err(Error::Invalid(format!("need at least two classes, got {num_classes}")));
    }
    use LayerKind::*;
    let stages: [(usize, usize); 5] = [(32, 0), (64, 1), (128, 2), (256, 3), (512, 5)];
    let mut layers = Vec::new();
    for (i, &(width, blocks)) in stages.iter().enumerate() {
        if i > 0 {
            layers.push(LayerSpec::new(MaxPool, stages[i - 1].0, 1));
        }
        layers.push(LayerSpec::new(ConvPrelu, width, 1));
        if blocks > 0 {
            layers.push(LayerSpec::new(ResidualBlock, width, blocks));
        }
    }
    layers.push(LayerSpec::new(FullyConnected, DEEPVISAGE_FEATURE_DIM, 1));
    layers.push(LayerSpec::new(FeatureNorm, DEEPVISAGE_FEATURE_DIM, 1));
    layers.push(LayerSpec::new(ClassifierHead, num_classes, 1));
    Ok(ArchitectureSpec {
        input_shape: DEEPVISAGE_INPUT,
        layers,
        feature_dim: DEEPVISAGE_FEATURE_DIM,
        num_classes,
        center_loss: None,
    })
}

/// Options for the 2-D MNIST feature network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mnist2dConfig {
    pub feature_norm: bool,
    pub center_loss: Option<CenterLossSpec>,
    /// Feature maps of the three conv pairs.
    pub widths: [usize; 3],
}

impl Default for Mnist2dConfig {
    fn default() -> Self {
        Self { feature_norm: true, center_loss: None, widths: [32, 64, 128] }
    }
}

pub fn build_mnist2d() -> ArchitectureSpec {
    build_mnist2d_with(Mnist2dConfig::default())
}

/// Six 3×3 CoPr layers in pairs around two max pools (28×28 → 7×7), FC with
/// two neurons, optional FN, and a ten-way softmax head.
pub fn build_mnist2d_with(config: Mnist2dConfig) -> ArchitectureSpec {
    use LayerKind::*;
    let [a, b, c] = config.widths;
    let mut layers = vec![
        LayerSpec::new(ConvPrelu, a, 2),
        LayerSpec::new(MaxPool, a, 1),
        LayerSpec::new(ConvPrelu, b, 2),
        LayerSpec::new(MaxPool, b, 1),
        LayerSpec::new(ConvPrelu, c, 2),
        LayerSpec::new(FullyConnected, 2, 1),
    ];
    if config.feature_norm {
        layers.push(LayerSpec::new(FeatureNorm, 2, 1));
    }
    layers.push(LayerSpec::new(ClassifierHead, 10, 1));
    ArchitectureSpec { input_shape: [1, 28, 28], layers, feature_dim: 2, num_classes: 10, center_loss: config.center_loss }
}
