//! Recurrent actor-critic network with hand-written gradients.
//!
//! Conv stack over the frame stack, optional info encoder concatenated with the
//! flattened conv features, a dense layer, an optional LSTM cell, then policy
//! and value heads. Rectifiers follow every conv and dense layer.

mod backward;
mod descriptor;
mod forward;
mod params;
mod tensor;


use thiserror::Error;

pub use backward::{backward, forward_rollout, gradient_check, rollout_loss, LossWeights};
pub use descriptor::{ArchConfig, ConvSpec, Descriptor, Layout};
pub use forward::{
    conv_activations, entropy, forward, greedy_action, sample_action, softmax, ConvCache, ForwardOutput, LstmCache,
    LstmState, NetInput, StepCache,
};
pub use params::{init_params, Gradients, NetworkParams, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use tensor::Tensor;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid architecture: {0}")]
    Config(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("malformed checkpoint: {0}")]
    Format(String),
    #[error("checkpoint io on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
