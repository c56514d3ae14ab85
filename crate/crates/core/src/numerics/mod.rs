//! Dense tensors, reverse-mode autodiff, Adam, and gradient checking.

pub mod adam;
pub mod gradcheck;
pub mod tape;
pub mod tensor;

pub use adam::{adam_step, AdamState};
pub use gradcheck::{grad_check, GradCheckReport};
pub use tape::{NodeId, Tape};
pub use tensor::Tensor;
