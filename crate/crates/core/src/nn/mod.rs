//! Minimal CPU training engine for the policy network: 3×3 convolutions,
//! 2×2 max pooling, dense layers, ReLU/tanh/sigmoid, MSE and BCE losses,
//! backpropagation and Adam.

mod adam;
pub mod checkpoint;
pub mod layers;
mod network;
mod real;
mod tensor;

use alloc::string::String;

pub use adam::{adam_update, AdamConfig, OptimState};
pub use network::{
    bce, idx, ForwardOutput, Gradients, NetConfig, NetworkParams, PoolLayout, Workspace, BCE_EPS,
};
pub use real::Real;
pub use tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NnError {
    #[error("shape mismatch at layer `{layer}`: expected {expected} values, got {got}")]
    ShapeMismatch { layer: String, expected: usize, got: usize },
    #[error("expected {expected} parameter tensors, got {got}")]
    TensorCount { expected: usize, got: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid network config: {0}")]
    InvalidConfig(&'static str),
}
