//! FIFO episode replay.

use std::collections::VecDeque;

use rand::Rng;

use crate::error::Result;
use crate::learner::episode::{Episode, EpisodeBatch};

/// Ring of complete episodes with uniform without-replacement sampling.
#[derive(Debug)]
pub struct ReplayBuffer {
    episodes: VecDeque<Episode>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            episodes: VecDeque::with_capacity(capacity.min(16384)),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Validates and stores a complete episode, evicting the oldest one
    /// when full.
    pub fn insert(&mut self, episode: Episode) -> Result<()> {
        episode.validate()?;
        if self.episodes.len() == self.capacity {
            self.episodes.pop_front();
        }
        self.episodes.push_back(episode);
        Ok(())
    }

    /// Uniformly samples `b` distinct episodes, padded to their longest
    /// length. Returns `None` while the buffer holds fewer than `b`.
    pub fn sample(&self, b: usize, rng: &mut impl Rng) -> Option<EpisodeBatch> {
        if self.episodes.len() < b || b == 0 {
            return None;
        }
        let picks = rand::seq::index::sample(rng, self.episodes.len(), b);
        let refs: Vec<&Episode> = picks.iter().map(|i| &self.episodes[i]).collect();
        Some(EpisodeBatch::from_episodes(&refs).expect("stored episodes are valid"))
    }

    #[cfg(test)]
    pub(crate) fn rewards(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.reward[0]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::episode::tiny_episode;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fifo_eviction() {
        let mut buf = ReplayBuffer::new(2);
        for marker in [1.0, 2.0, 3.0] {
            buf.insert(tiny_episode(marker)).unwrap();
        }
        assert_eq!(buf.len(), 2);
        assert_eq!(buf.rewards(), vec![2.0, 3.0]);
    }

    #[test]
    fn malformed_episode_rejected() {
        let mut buf = ReplayBuffer::new(4);
        let mut bad = tiny_episode(0.0);
        bad.reward.clear();
        assert!(buf.insert(bad).is_err());
        assert!(buf.is_empty());
    }

    #[test]
    fn capacity_5000_holds_exactly_5000() {
        let mut buf = ReplayBuffer::new(5000);
        for i in 0..5000 {
            buf.insert(tiny_episode(i as f64)).unwrap();
        }
        assert_eq!(buf.len(), 5000);
        buf.insert(tiny_episode(-1.0)).unwrap();
        assert_eq!(buf.len(), 5000);
    }

    #[test]
    fn sample_not_ready_below_batch_size() {
        let mut buf = ReplayBuffer::new(8);
        buf.insert(tiny_episode(0.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(buf.sample(2, &mut rng).is_none());
        assert!(buf.sample(1, &mut rng).is_some());
    }

    #[test]
    fn single_episode_buffer_returns_it() {
        let mut buf = ReplayBuffer::new(8);
        buf.insert(tiny_episode(7.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let batch = buf.sample(1, &mut rng).unwrap();
        assert_eq!(batch.reward(0, 0), 7.0);
    }

    #[test]
    fn single_draws_are_uniform() {
        let mut buf = ReplayBuffer::new(8);
        for marker in 0..4 {
            buf.insert(tiny_episode(marker as f64)).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let trials = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..trials {
            let batch = buf.sample(1, &mut rng).unwrap();
            counts[batch.reward(0, 0) as usize] += 1;
        }
        for c in counts {
            let f = c as f64 / trials as f64;
            assert!((f - 0.25).abs() <= 0.01, "{f}");
        }
    }
}
