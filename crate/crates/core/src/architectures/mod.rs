//! Declarative network descriptions and the models instantiated from them.

mod model;
mod spec;

pub use model::{FeatureTap, ForwardPass, Model, ParamKind, ParamMut};
pub use spec::{
    build_deepvisage, build_mnist2d, build_mnist2d_with, param_count, shape_trace, ArchitectureSpec,
    CenterLossSpec, LayerKind, LayerSpec, Mnist2dConfig, ParamCount, TracedShape,
    DEEPVISAGE_FEATURE_DIM, DEEPVISAGE_INPUT,
};
