//! Cooperative multi-agent Q-learning with value-function mixing.
//!
//! The crate trains teams of recurrent Q-agents under centralized training
//! with decentralized execution. Per-agent action values are combined into
//! a joint value by one of three mixers: VDN (plain sum), QMIX (monotonic
//! state-conditioned hypernetwork), or TransMix (stacked additive-attention
//! encoder over agent values, histories, and global state). Everything runs
//! on a small built-in autodiff engine so that gradients are checkable
//! against finite differences end to end.

pub mod agent;
pub mod battery;
pub mod envs;
pub mod harness;
pub mod error;
pub mod learner;
pub mod mixers;
pub mod nn;
pub mod numerics;

pub use error::{Error, Result};
