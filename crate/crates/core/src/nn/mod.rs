//! A small reverse-mode autodiff tape over `ndarray` tensors.
//!
//! The tape covers exactly the operations the detection network needs:
//! stride-1 convolution (with padding and dilation), 2x2 max pooling,
//! batch normalization, ReLU/sigmoid, broadcast multiplication for
//! attention gates, channel concatenation, sub-pixel shuffle, global
//! average pooling, fully connected layers and the Smooth-L1 objective.
//! Everything is generic over `f32`/`f64`; gradient checks run the whole
//! stack at `f64`.

mod adam;
mod conv;
pub mod gradcheck;
mod tape;

pub use adam::{Adam, AdamConfig};
pub use conv::{conv2d_forward, conv2d_backward, conv_out_size};
pub use tape::{Gradients, NodeId, Op, Tape};

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, NumAssign};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point element type the tape runs on.
pub trait Scalar:
    Float
    + FromPrimitive
    + NumAssign
    + ScalarOperand
    + LinalgScalar
    + Sum
    + Display
    + Debug
    + Send
    + Sync
    + 'static
{
    /// Shorthand for lossy conversion from f64 constants.
    fn from_f64_c(v: f64) -> Self {
        Self::from_f64(v).expect("finite constant")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
