//! Episode storage and batched replay views.

use crate::error::{Error, Result};

/// One complete episode. Observations, states and availability masks have
/// one extra trailing entry (the post-terminal view) so TD targets can
/// look one step ahead.
#[derive(Debug, Clone)]
pub struct Episode {
    pub n_agents: usize,
    pub obs_dim: usize,
    pub s_dim: usize,
    pub n_actions: usize,
    /// `[len+1][agent][obs_dim]`
    pub obs: Vec<Vec<Vec<f64>>>,
    /// `[len+1][s_dim]`
    pub state: Vec<Vec<f64>>,
    /// `[len+1][agent][action]`
    pub avail: Vec<Vec<Vec<bool>>>,
    /// `[len][agent]`
    pub actions: Vec<Vec<usize>>,
    /// `[len]` joint reward
    pub reward: Vec<f64>,
    /// `[len]`
    pub terminated: Vec<bool>,
    /// True when the final step ended the episode for a reason other than
    /// the environment horizon (kept for bookkeeping; targets treat any
    /// terminated flag as absorbing).
    pub won: bool,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn env_steps(&self) -> u64 {
        self.len() as u64
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.len();
        if t == 0 {
            return Err(Error::InvalidArgument("empty episode".into()));
        }
        if self.obs.len() != t + 1 || self.state.len() != t + 1 || self.avail.len() != t + 1 {
            return Err(Error::InvalidArgument(format!(
                "episode of length {t} must carry {} observation slots",
                t + 1
            )));
        }
        if self.reward.len() != t || self.terminated.len() != t {
            return Err(Error::InvalidArgument(
                "reward / terminated length mismatch".into(),
            ));
        }
        for (step, flag) in self.terminated.iter().enumerate() {
            if *flag && step + 1 != t {
                return Err(Error::InvalidArgument(format!(
                    "terminated at step {step} but episode has {t} steps"
                )));
            }
        }
        for slot in &self.obs {
            if slot.len() != self.n_agents || slot.iter().any(|o| o.len() != self.obs_dim) {
                return Err(Error::InvalidArgument("observation shape mismatch".into()));
            }
        }
        if self.state.iter().any(|s| s.len() != self.s_dim) {
            return Err(Error::InvalidArgument("state shape mismatch".into()));
        }
        for slot in &self.avail {
            if slot.len() != self.n_agents || slot.iter().any(|a| a.len() != self.n_actions) {
                return Err(Error::InvalidArgument("availability shape mismatch".into()));
            }
        }
        if self
            .actions
            .iter()
            .any(|js| js.len() != self.n_agents || js.iter().any(|&a| a >= self.n_actions))
        {
            return Err(Error::InvalidArgument("action out of range".into()));
        }
        Ok(())
    }
}

/// A batch of episodes padded to a common length.
///
/// `filled[b][t]` is a prefix mask per episode: ones up to the episode
/// length, zeros after. Padded availability exposes only action 0 so a
/// masked argmax stays well-defined.
#[derive(Debug, Clone)]
pub struct EpisodeBatch {
    pub b: usize,
    pub t_max: usize,
    pub n_agents: usize,
    pub obs_dim: usize,
    pub s_dim: usize,
    pub n_actions: usize,
    obs: Vec<f64>,
    state: Vec<f64>,
    avail: Vec<bool>,
    actions: Vec<usize>,
    reward: Vec<f64>,
    terminated: Vec<f64>,
    filled: Vec<f64>,
}

impl EpisodeBatch {
    pub fn from_episodes(episodes: &[&Episode]) -> Result<Self> {
        Self::from_episodes_padded(episodes, 0)
    }

    /// Like [`from_episodes`](Self::from_episodes), padded to at least
    /// `min_len` steps (fixed-length batching).
    pub fn from_episodes_padded(episodes: &[&Episode], min_len: usize) -> Result<Self> {
        let first = episodes
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty batch".into()))?;
        let (n, od, sd, na) = (first.n_agents, first.obs_dim, first.s_dim, first.n_actions);
        if episodes
            .iter()
            .any(|e| e.n_agents != n || e.obs_dim != od || e.s_dim != sd || e.n_actions != na)
        {
            return Err(Error::InvalidArgument(
                "episodes in one batch must share dimensions".into(),
            ));
        }
        let b = episodes.len();
        let t_max = episodes
            .iter()
            .map(|e| e.len())
            .max()
            .unwrap()
            .max(min_len);

        let mut batch = EpisodeBatch {
            b,
            t_max,
            n_agents: n,
            obs_dim: od,
            s_dim: sd,
            n_actions: na,
            obs: vec![0.0; b * (t_max + 1) * n * od],
            state: vec![0.0; b * (t_max + 1) * sd],
            avail: vec![false; b * (t_max + 1) * n * na],
            actions: vec![0; b * t_max * n],
            reward: vec![0.0; b * t_max],
            terminated: vec![0.0; b * t_max],
            filled: vec![0.0; b * t_max],
        };
        // Padded slots keep noop available.
        for slot in batch.avail.chunks_mut(na) {
            slot[0] = true;
        }

        for (bi, ep) in episodes.iter().enumerate() {
            for t in 0..=ep.len() {
                for i in 0..n {
                    let dst = batch.obs_index(bi, t, i);
                    batch.obs[dst..dst + od].copy_from_slice(&ep.obs[t][i]);
                    let dst = batch.avail_index(bi, t, i);
                    for (k, &a) in ep.avail[t][i].iter().enumerate() {
                        batch.avail[dst + k] = a;
                    }
                }
                let dst = batch.state_index(bi, t);
                batch.state[dst..dst + sd].copy_from_slice(&ep.state[t]);
            }
            for t in 0..ep.len() {
                for i in 0..n {
                    batch.actions[(bi * t_max + t) * n + i] = ep.actions[t][i];
                }
                batch.reward[bi * t_max + t] = ep.reward[t];
                batch.terminated[bi * t_max + t] = if ep.terminated[t] { 1.0 } else { 0.0 };
                batch.filled[bi * t_max + t] = 1.0;
            }
        }
        Ok(batch)
    }

    fn obs_index(&self, b: usize, t: usize, agent: usize) -> usize {
        ((b * (self.t_max + 1) + t) * self.n_agents + agent) * self.obs_dim
    }

    fn state_index(&self, b: usize, t: usize) -> usize {
        (b * (self.t_max + 1) + t) * self.s_dim
    }

    fn avail_index(&self, b: usize, t: usize, agent: usize) -> usize {
        ((b * (self.t_max + 1) + t) * self.n_agents + agent) * self.n_actions
    }

    pub fn obs(&self, b: usize, t: usize, agent: usize) -> &[f64] {
        let i = self.obs_index(b, t, agent);
        &self.obs[i..i + self.obs_dim]
    }

    pub fn state(&self, b: usize, t: usize) -> &[f64] {
        let i = self.state_index(b, t);
        &self.state[i..i + self.s_dim]
    }

    pub fn avail(&self, b: usize, t: usize, agent: usize) -> &[bool] {
        let i = self.avail_index(b, t, agent);
        &self.avail[i..i + self.n_actions]
    }

    pub fn action(&self, b: usize, t: usize, agent: usize) -> usize {
        self.actions[(b * self.t_max + t) * self.n_agents + agent]
    }

    /// Action taken at `t - 1`, or `None` at the first step.
    pub fn prev_action(&self, b: usize, t: usize, agent: usize) -> Option<usize> {
        if t == 0 || self.filled(b, t - 1) == 0.0 {
            None
        } else {
            Some(self.action(b, t - 1, agent))
        }
    }

    pub fn reward(&self, b: usize, t: usize) -> f64 {
        self.reward[b * self.t_max + t]
    }

    pub fn terminated(&self, b: usize, t: usize) -> f64 {
        self.terminated[b * self.t_max + t]
    }

    pub fn filled(&self, b: usize, t: usize) -> f64 {
        self.filled[b * self.t_max + t]
    }

    pub fn filled_total(&self) -> f64 {
        self.filled.iter().sum()
    }

    /// Mutable padding access for tests probing mask behavior.
    pub fn poison_padding(&mut self, value: f64) {
        for b in 0..self.b {
            for t in 0..self.t_max {
                if self.filled(b, t) == 0.0 {
                    self.reward[b * self.t_max + t] = value;
                    let oi = self.obs_index(b, t + 1, 0);
                    let span = self.n_agents * self.obs_dim;
                    for v in &mut self.obs[oi..oi + span] {
                        *v = value;
                    }
                    let si = self.state_index(b, t + 1);
                    let span = self.s_dim;
                    for v in &mut self.state[si..si + span] {
                        *v = value;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
pub(crate) fn tiny_episode(marker: f64) -> Episode {
    Episode {
        n_agents: 1,
        obs_dim: 1,
        s_dim: 1,
        n_actions: 2,
        obs: vec![vec![vec![0.0]], vec![vec![0.0]]],
        state: vec![vec![1.0], vec![1.0]],
        avail: vec![vec![vec![true, true]], vec![vec![true, true]]],
        actions: vec![vec![0]],
        reward: vec![marker],
        terminated: vec![true],
        won: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn valid_episode_passes() {
        tiny_episode(1.0).validate().unwrap();
    }

    #[test]
    fn early_termination_rejected() {
        let mut ep = tiny_episode(0.0);
        // stretch to two steps but terminate at the first
        ep.obs.push(ep.obs[0].clone());
        ep.state.push(ep.state[0].clone());
        ep.avail.push(ep.avail[0].clone());
        ep.actions.push(vec![1]);
        ep.reward.push(0.0);
        ep.terminated = vec![true, false];
        assert!(ep.validate().is_err());
    }

    #[test]
    fn batch_pads_to_longest_and_masks_fill() {
        let short = tiny_episode(1.0);
        let mut long = tiny_episode(2.0);
        long.obs.push(long.obs[0].clone());
        long.state.push(long.state[0].clone());
        long.avail.push(long.avail[0].clone());
        long.actions.push(vec![1]);
        long.reward.push(3.0);
        long.terminated = vec![false, true];

        let batch = EpisodeBatch::from_episodes(&[&short, &long]).unwrap();
        assert_eq!(batch.t_max, 2);
        assert_eq!(batch.filled(0, 0), 1.0);
        assert_eq!(batch.filled(0, 1), 0.0);
        assert_eq!(batch.filled(1, 1), 1.0);
        assert_eq!(batch.reward(1, 1), 3.0);
        // padded availability keeps noop open
        assert_eq!(batch.avail(0, 2, 0), &[true, false]);
        assert_eq!(batch.prev_action(1, 1, 0), Some(0));
        assert_eq!(batch.prev_action(0, 0, 0), None);
    }
}
