//! Blockwise causally masked fully connected density network.

mod config;
mod mask;
mod model;

pub use config::{Activation, NetConfig, COORDS_PER_KEYPOINT};
pub use mask::{build_masks, MaskSet};
pub use model::{CausalNet, ForwardPass, Gradients, LayerGrad};
