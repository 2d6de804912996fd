//! Convolutional network building blocks with reverse-mode differentiation,
//! a momentum-SGD training loop, landmark-based face alignment and the
//! verification metrics used to score face embeddings.

pub mod architectures;
pub mod data;
pub mod error;
pub mod preprocess;
pub mod tensor_core;
pub mod trainer;
pub mod verification;

pub use error::{Error, Result};
