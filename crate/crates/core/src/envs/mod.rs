//! Desk-scale Dec-POMDP environments.
//!
//! Two families: one-step cooperative matrix games (exact brute-force
//! oracles) and a partially observable grid skirmish against a scripted
//! enemy. A Gaussian-noise wrapper corrupts the global state stream
//! without touching observations or rewards.

pub mod fixtures;
pub mod matrix;
pub mod noise;
pub mod skirmish;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use fixtures::fixture;
pub use matrix::MatrixGame;
pub use noise::{noisy_state, NoisyEnv};
pub use skirmish::Skirmish;

/// Declarative description of an environment instance.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    Matrix(MatrixGameSpec),
    Skirmish(SkirmishSpec),
}

impl EnvSpec {
    pub fn build(&self) -> Result<Box<dyn Env>> {
        match self {
            EnvSpec::Matrix(spec) => Ok(Box::new(MatrixGame::new(spec.clone())?)),
            EnvSpec::Skirmish(spec) => Ok(Box::new(Skirmish::new(spec.clone())?)),
        }
    }
}

/// Cooperative one-step matrix game. The payoff tensor is flattened
/// agent-major: the joint action `(a_0, .., a_{n-1})` indexes entry
/// `sum_i a_i * |A|^(n-1-i)`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MatrixGameSpec {
    pub n_agents: usize,
    pub n_actions: usize,
    pub payoff: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct UnitSpec {
    pub x: i32,
    pub y: i32,
    pub hp: u32,
    pub damage: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RewardSpec {
    /// Reward per enemy hit point removed.
    #[serde(default = "default_w_damage")]
    pub w_damage: f64,
    /// Bonus per enemy killed.
    #[serde(default = "default_kill_bonus")]
    pub kill_bonus: f64,
    /// Bonus for eliminating every enemy.
    #[serde(default = "default_win_bonus")]
    pub win_bonus: f64,
    /// Rescale so the maximum episodic return is 20.
    #[serde(default)]
    pub normalize: bool,
}

fn default_w_damage() -> f64 {
    1.0
}
fn default_kill_bonus() -> f64 {
    10.0
}
fn default_win_bonus() -> f64 {
    200.0
}

impl Default for RewardSpec {
    fn default() -> Self {
        RewardSpec {
            w_damage: default_w_damage(),
            kill_bonus: default_kill_bonus(),
            win_bonus: default_win_bonus(),
            normalize: false,
        }
    }
}

/// Grid battle: allied agents against scripted enemies. Attack range is
/// one cell (Chebyshev); sight range bounds each agent's view.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SkirmishSpec {
    pub width: i32,
    pub height: i32,
    pub allies: Vec<UnitSpec>,
    pub enemies: Vec<UnitSpec>,
    pub horizon: usize,
    pub sight_range: i32,
    #[serde(default)]
    pub reward: RewardSpec,
}

/// Outcome of one environment step.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub observations: Vec<Vec<f64>>,
    pub state: Vec<f64>,
    pub reward: f64,
    pub terminated: bool,
    pub won: bool,
}

/// A Dec-POMDP instance owned by a single rollout worker.
pub trait Env: Send {
    fn n_agents(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn obs_dim(&self) -> usize;
    fn state_dim(&self) -> usize;
    fn max_steps(&self) -> usize;

    /// Restores the start state. The result is a pure function of
    /// `(spec, seed)`. Returns the initial observations and global state.
    fn reset(&mut self, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>);

    fn state(&self) -> Vec<f64>;
    fn observe(&self, agent: usize) -> Vec<f64>;
    fn avail_actions(&self, agent: usize) -> Vec<bool>;

    /// Executes a joint action. Every entry must be available.
    fn step(&mut self, joint_action: &[usize]) -> Result<StepResult>;
}
