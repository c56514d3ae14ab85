//! Training hyperparameters and the exploration schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    /// Masked mean: loss magnitude independent of episode length.
    MaskedMean,
    /// Plain masked sum.
    MaskedSum,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub gamma: f64,
    pub batch_episodes: usize,
    pub buffer_capacity: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Env steps over which epsilon anneals linearly.
    pub anneal_steps: u64,
    pub target_update_episodes: u64,
    pub total_env_steps: u64,
    pub lr: f64,
    pub loss_mode: LossMode,
    /// Optional clip of the global gradient norm; off by default.
    pub grad_clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.99,
            batch_episodes: 32,
            buffer_capacity: 5000,
            eps_start: 1.0,
            eps_end: 0.05,
            anneal_steps: 10_000,
            target_update_episodes: 200,
            total_env_steps: 200_000,
            lr: 0.001,
            loss_mode: LossMode::MaskedMean,
            grad_clip_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma {} not in [0, 1)", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.eps_start)
            || !(0.0..=self.eps_start).contains(&self.eps_end)
        {
            return Err(Error::Config(format!(
                "need 0 <= eps_end <= eps_start <= 1, got {} / {}",
                self.eps_end, self.eps_start
            )));
        }
        if self.anneal_steps == 0 {
            return Err(Error::Config("anneal_steps must be at least 1".into()));
        }
        if self.batch_episodes == 0 || self.buffer_capacity == 0 {
            return Err(Error::Config(
                "batch_episodes and buffer_capacity must be positive".into(),
            ));
        }
        if self.target_update_episodes == 0 {
            return Err(Error::Config("target_update_episodes must be positive".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!("bad learning rate {}", self.lr)));
        }
        Ok(())
    }
}

/// Linear annealing from `eps_start` to `eps_end` over `anneal_steps`
/// environment steps, clamped at the end value. The endpoint is exact:
/// `epsilon_at(anneal_steps) == eps_end` with no rounding residue.
pub fn epsilon_at(step: u64, cfg: &TrainConfig) -> f64 {
    if step >= cfg.anneal_steps {
        return cfg.eps_end;
    }
    let frac = step as f64 / cfg.anneal_steps as f64;
    (cfg.eps_start - (cfg.eps_start - cfg.eps_end) * frac).max(cfg.eps_end)
}
