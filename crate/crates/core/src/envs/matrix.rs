//! One-step cooperative matrix games.

use crate::error::{Error, Result};
use crate::envs::{Env, MatrixGameSpec, StepResult};

/// Each agent observes its own id one-hot; the global state is a constant
/// all-ones vector. One joint action ends the episode with the payoff as
/// the joint reward.
#[derive(Debug, Clone)]
pub struct MatrixGame {
    spec: MatrixGameSpec,
    done: bool,
}

impl MatrixGame {
    pub fn new(spec: MatrixGameSpec) -> Result<Self> {
        let expected = spec.n_actions.pow(spec.n_agents as u32);
        if spec.n_agents == 0 || spec.n_actions == 0 {
            return Err(Error::Config(
                "matrix game needs at least one agent and one action".into(),
            ));
        }
        if spec.payoff.len() != expected {
            return Err(Error::Config(format!(
                "matrix game payoff has {} entries, expected {}^{} = {}",
                spec.payoff.len(),
                spec.n_actions,
                spec.n_agents,
                expected
            )));
        }
        if !spec.payoff.iter().all(|v| v.is_finite()) {
            return Err(Error::Config("matrix game payoff must be finite".into()));
        }
        Ok(MatrixGame { spec, done: false })
    }

    pub fn payoff_index(&self, joint: &[usize]) -> usize {
        joint
            .iter()
            .fold(0usize, |acc, &a| acc * self.spec.n_actions + a)
    }

    /// Exhaustive search over all `|A|^n` joint actions.
    /// Ties break toward the lexicographically smallest joint action.
    pub fn brute_force_optimum(spec: &MatrixGameSpec) -> (Vec<usize>, f64) {
        let n = spec.n_agents;
        let mut best_joint = vec![0usize; n];
        let mut best = f64::NEG_INFINITY;
        let total = spec.n_actions.pow(n as u32);
        for flat in 0..total {
            let mut joint = vec![0usize; n];
            let mut rem = flat;
            for i in (0..n).rev() {
                joint[i] = rem % spec.n_actions;
                rem /= spec.n_actions;
            }
            let v = spec.payoff[flat];
            if v > best {
                best = v;
                best_joint = joint;
            }
        }
        (best_joint, best)
    }
}

impl Env for MatrixGame {
    fn n_agents(&self) -> usize {
        self.spec.n_agents
    }

    fn n_actions(&self) -> usize {
        self.spec.n_actions
    }

    fn obs_dim(&self) -> usize {
        self.spec.n_agents
    }

    fn state_dim(&self) -> usize {
        self.spec.n_agents
    }

    fn max_steps(&self) -> usize {
        1
    }

    fn reset(&mut self, _seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        self.done = false;
        let obs = (0..self.spec.n_agents).map(|i| self.observe(i)).collect();
        (obs, self.state())
    }

    fn state(&self) -> Vec<f64> {
        vec![1.0; self.spec.n_agents]
    }

    fn observe(&self, agent: usize) -> Vec<f64> {
        let mut o = vec![0.0; self.spec.n_agents];
        o[agent] = 1.0;
        o
    }

    fn avail_actions(&self, _agent: usize) -> Vec<bool> {
        vec![true; self.spec.n_actions]
    }

    fn step(&mut self, joint_action: &[usize]) -> Result<StepResult> {
        if self.done {
            return Err(Error::InvalidArgument(
                "matrix game episode already terminated".into(),
            ));
        }
        if joint_action.len() != self.spec.n_agents
            || joint_action.iter().any(|&a| a >= self.spec.n_actions)
        {
            return Err(Error::InvalidArgument(format!(
                "invalid joint action {joint_action:?}"
            )));
        }
        self.done = true;
        let reward = self.spec.payoff[self.payoff_index(joint_action)];
        Ok(StepResult {
            observations: (0..self.spec.n_agents).map(|i| self.observe(i)).collect(),
            state: self.state(),
            reward,
            terminated: true,
            won: false,
        })
    }
}
