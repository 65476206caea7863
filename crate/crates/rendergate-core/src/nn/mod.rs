//! A small tensor/layer stack: exactly the pieces the rendering classifier
//! needs, with explicit forward/backward passes and an Adam optimizer.
//!
//! Everything is generic over the float type; training runs in f32, the
//! gradient checker instantiates the same code in f64.

mod block;
mod conv;
mod gradcheck;
mod layers;
mod loss;
mod mm;
mod optim;
mod tensor;

pub use block::InvertedResidual;
pub use conv::{Conv2d, ConvKind};
pub use gradcheck::{check_stack, max_rel_err, Stack, StackLayer};
pub use layers::{BatchNorm, GlobalAvgPool, Linear, Relu6};
pub use loss::{bce_single, bce_with_logits, sigmoid};
pub use optim::{adam_update, lr_at, Adam, TrainConfig};
pub use tensor::{Param, Tensor};

use alloc::vec::Vec;
use core::fmt;

/// Whether a forward pass uses batch statistics (and records caches) or the
/// frozen running statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NnError {
    ShapeMismatch { what: &'static str, expected: Vec<usize>, got: Vec<usize> },
}

impl fmt::Display for NnError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NnError::ShapeMismatch { what, expected, got } => {
                write!(f, "shape mismatch at {what}: expected {expected:?}, got {got:?}")
            }
        }
    }
}

impl core::error::Error for NnError {}
