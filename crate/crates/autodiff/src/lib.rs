//! Minimal deterministic tensor library with reverse-mode automatic
//! differentiation, sized for convolutional reasoning models.
//!
//! All tensors are dense, row-major and channel-last (`[N, H, W, C]` for
//! images, `[kh, kw, Cin, Cout]` for convolution kernels). Operations are
//! recorded on a [`Graph`] during the forward pass and replayed in exact
//! reverse order by [`Graph::backward`], so two identical runs produce
//! bit-identical gradients.
//!
//! - [`Tensor`]: shape + data, optional gradient buffer
//! - [`Graph`] / [`Var`]: the recording tape and handles into it
//! - [`ParamSet`]: named learnable tensors and non-trainable buffers
//! - [`Adam`]: bias-corrected Adam optimizer
//! - [`checkpoint`]: the `CPCW` weight file format
//! - [`gradcheck`]: central finite-difference verification

pub mod adam;
pub mod checkpoint;
mod error;
pub mod gradcheck;
mod graph;
pub mod init;
pub mod kernels;
mod params;
mod scalar;
mod tensor;

pub use adam::{Adam, AdamConfig, AdamState};
pub use error::{Result, TensorError};
pub use graph::{Activation, BatchStats, Gradients, Graph, Padding, Var};
pub use params::{ParamId, ParamSet};
pub use scalar::Float;
pub use tensor::Tensor;
