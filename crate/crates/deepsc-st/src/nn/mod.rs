//! Minimal tensor library with reverse-mode differentiation.
//!
//! Everything runs on 64-bit reals. The op set covers the codec
//! architecture (dense, strided conv, bidirectional GRU, softmax) plus the
//! plumbing needed to train it end to end with plain SGD.

mod graph;
mod layers;
mod params;
mod tensor;

pub use graph::{Gradients, Graph, NodeId};
pub use layers::{
    apply_activation, bigru_forward, conv2d_forward, dense_forward, emit_bigru, emit_dense,
    emit_gru, softmax, Activation, BiGruParams, GruDirection,
};
pub use params::{
    sgd_step, ModelParams, NamedGradients, TrainConfig, PREFIX_CHANNEL_DECODER,
    PREFIX_CHANNEL_ENCODER, PREFIX_SEMANTIC_ENCODER,
};
pub use tensor::Tensor;

/// Errors from tensor and graph operations.
#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("non-finite value")]
    NonFinite,
    #[error("gradient keys do not match parameters: {0}")]
    KeyMismatch(String),
    #[error("backward called before any forward pass was recorded")]
    NoForwardPass,
}
