//! Small dense networks with hand-written reverse-mode gradients.
//!
//! Everything is `f64`. Matrices are row-major with one row per example, so
//! a layer maps a `batch × in` block to `batch × out` via `A Wᵀ + b`.

mod layer;
mod optim;
mod params;
mod vae_ops;

pub use layer::{Activation, DenseLayer, ForwardCache, LayerGrad, Mlp};
pub use optim::{AdamConfig, OptimizerState};
pub use params::{decode_params_le, encode_params_le, ParamLayout, ParamRef, ParamSlot, ParamVector};
pub use vae_ops::{
    kl_gaussian, kl_gaussian_grad, reparameterize, reparameterize_backward, LOGVAR_MAX,
    LOGVAR_MIN,
};
