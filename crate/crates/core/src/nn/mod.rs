//! A small fully-connected network trained from scratch: forward and exact
//! reverse-mode gradients, a weighted squared-error loss, and AdamW.

mod adamw;
mod loss;
mod mlp;

pub use adamw::{AdamW, AdamWConfig};
pub use loss::weighted_mse_and_grad;
pub use mlp::{Activation, ActivationKind, ForwardCache, Layer, MlpConfig, MlpGradients, MlpModel};
