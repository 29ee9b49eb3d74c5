//! A minimal deterministic feedforward engine: tensors, conv/pool/dense
//! layers, softmax cross-entropy, reverse-mode gradients, SGD.

pub mod checkpoint;
pub mod gradcheck;
pub mod layer;
pub mod model;
pub mod tensor;

pub use layer::{Layer, LayerCache};
pub use model::{Model, Stage};
pub use tensor::Tensor;
