//! Dense rank-4 tensors with a recording gradient tape.
//!
//! Values live in [`Tensor`]; differentiable computation happens on
//! [`Var`] handles recorded on a [`Tape`]. Convolutions lower to
//! im2col + GEMM and fan out over the batch with rayon when the `parallel`
//! feature is on.

pub mod adam;
pub mod checkpoint;
mod error;
pub mod gradcheck;
pub mod init;
pub mod kernels;
mod ops;
pub mod par;
mod scalar;
mod shape;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use checkpoint::Checkpoint;
pub use error::{Result, TensorError};
pub use gradcheck::{grad_check, GradCheck, GradCheckReport};
pub use kernels::ConvGeom;
pub use ops::{softmax, NORM_EPS};
pub use scalar::Scalar;
pub use shape::Shape;
pub use tape::{Tape, Var};
pub use tensor::Tensor;
