//! Gaussian corruption of the global state stream.
//!
//! Simulates fog of war for the centralized mixer: only the state vector
//! is perturbed; observations and rewards pass through untouched, so
//! decentralized execution never sees the noise directly.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::envs::{Env, StepResult};
use crate::error::Result;

/// Adds i.i.d. `N(0, sigma^2)` noise per dimension.
pub fn noisy_state(state: &[f64], sigma: f64, rng: &mut impl Rng) -> Vec<f64> {
    if sigma == 0.0 {
        return state.to_vec();
    }
    state.iter().map(|v| v + sigma * standard_normal(rng)).collect()
}

/// Box-Muller standard normal draw (two uniforms per sample).
fn standard_normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Wraps an environment so every emitted global state is noisy.
pub struct NoisyEnv {
    inner: Box<dyn Env>,
    sigma: f64,
    rng: ChaCha8Rng,
}

impl NoisyEnv {
    pub fn new(inner: Box<dyn Env>, sigma: f64, rng: ChaCha8Rng) -> Self {
        NoisyEnv { inner, sigma, rng }
    }
}

impl Env for NoisyEnv {
    fn n_agents(&self) -> usize {
        self.inner.n_agents()
    }

    fn n_actions(&self) -> usize {
        self.inner.n_actions()
    }

    fn obs_dim(&self) -> usize {
        self.inner.obs_dim()
    }

    fn state_dim(&self) -> usize {
        self.inner.state_dim()
    }

    fn max_steps(&self) -> usize {
        self.inner.max_steps()
    }

    fn reset(&mut self, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let (obs, state) = self.inner.reset(seed);
        (obs, noisy_state(&state, self.sigma, &mut self.rng))
    }

    fn state(&self) -> Vec<f64> {
        // Stateless wrapper reads go through the clean state; the noisy
        // stream is what reset/step hand out.
        self.inner.state()
    }

    fn observe(&self, agent: usize) -> Vec<f64> {
        self.inner.observe(agent)
    }

    fn avail_actions(&self, agent: usize) -> Vec<bool> {
        self.inner.avail_actions(agent)
    }

    fn step(&mut self, joint_action: &[usize]) -> Result<StepResult> {
        let mut result = self.inner.step(joint_action)?;
        result.state = noisy_state(&result.state, self.sigma, &mut self.rng);
        Ok(result)
    }
}
