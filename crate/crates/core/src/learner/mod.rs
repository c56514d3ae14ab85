//! Episode replay, TD-target computation, and the training step.

pub mod buffer;
pub mod episode;
pub mod schedule;
pub mod trainer;

pub use buffer::ReplayBuffer;
pub use episode::{Episode, EpisodeBatch};
pub use schedule::{epsilon_at, LossMode, TrainConfig};
pub use trainer::{build_td_loss, compute_targets, td_loss, Learner, StepMetrics};
