//! Dense tensors and the differentiable operations of the network.

mod activation;
mod checkpoint;
mod conv;
pub mod gradcheck;
mod graph;
mod linear;
mod loss;
mod norm;
mod pool;
mod real;
mod tensor;

pub use activation::{PreluParams, INITIAL_SLOPE};
pub use checkpoint::{write_atomic, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use conv::{ConvParams, KERNEL};
pub use graph::{record_conv_prelu, ConvPreluVars, Graph, Var};
pub use linear::FcParams;
pub use loss::{CenterState, CENTER_ALPHA, CENTER_LAMBDA};
pub use norm::{FeatureNormState, NormMode, DEFAULT_EPSILON, DEFAULT_MOMENTUM};
pub use pool::WINDOW as POOL_WINDOW;
pub use real::Real;
pub use tensor::Tensor;
