//! Forward and backward kernels for the operator set the network uses.
//!
//! The public functions here are plain tensor-in, tensor-out forward passes;
//! [`crate::autodiff::Tape`] wraps them and records their backward rules.

pub mod activation;
pub mod channel;
pub mod conv;
pub mod loss;
pub mod norm;
pub mod shuffle;

pub use activation::gelu;
pub use channel::{channel_gram, channel_mix, l2_normalize_planes, softmax_last};
pub use conv::{conv2d, Conv2dSpec, ConvGeometry};
pub use loss::l1_loss;
pub use norm::{group_norm, layer_norm};
pub use shuffle::{concat_channels, pixel_shuffle, pixel_unshuffle};
