// Validation uses `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod autodiff;
pub mod checkpoint;
pub mod error;
mod framing;
pub mod lineformer;
pub mod model;
pub mod nn;
pub mod ops;
pub mod raw;
pub mod tensor;
pub mod train;
pub mod verify;

pub use autodiff::{Tape, Var};
pub use error::{Error, Result};
pub use tensor::{DType, Element, Tensor};
