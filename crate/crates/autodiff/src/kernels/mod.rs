//! Forward/backward numeric kernels. These are plain functions over
//! row-major slices; [`crate::Graph`] wires them into the tape.

mod conv;
mod norm;
mod pool;
mod shape;

pub use conv::{conv2d_backward, conv2d_forward, ConvGeom, Padding};
pub use norm::{batchnorm_backward, batchnorm_infer, batchnorm_train, BatchNormCache};
pub use pool::{maxpool2d_backward, maxpool2d_forward, PoolGeom};
pub use shape::{mean_axis, mean_axis_backward, permute, permute_shape, split_axis};
