//! Experiment harness: configuration, the training loop, metrics,
//! checkpoints, and multi-seed summaries.

pub mod checkpoint;
pub mod config;
pub mod metrics;
pub mod runner;
pub mod summarize;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, EnvDims};
pub use config::{load_config, parse_config, ExperimentConfig, MixerKind};
pub use metrics::{read_metrics, MetricsRow, MetricsWriter, CSV_HEADER};
pub use runner::{
    collect_episode, eval_checkpoint, init_networks, run_eval, run_train, run_train_until,
    EvalOutcome, RunOutput,
};
pub use summarize::{median, summarize, Summary};
