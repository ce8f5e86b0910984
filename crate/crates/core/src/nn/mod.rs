//! U-Net inference for the learned viscosity solver.
//!
//! Inputs are padded symmetric-grid channel stacks, outputs the two
//! velocity-change channels on the same layout.

pub mod manifest;
pub mod tensor;
pub mod unet;
pub mod winograd;

pub use manifest::{Layer, LayerKind, UnetConfig, WeightManifest};
pub use tensor::{avg_pool2, concat, conv2d, tconv2_up, Tensor};
pub use unet::{forward, Unet};
