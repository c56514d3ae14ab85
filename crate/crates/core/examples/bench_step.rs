//! Rough train-step timing probe (not shipped as a benchmark).
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use transmix_core::agent::{AgentDims, AgentNetParams};
use transmix_core::learner::{Episode, Learner, ReplayBuffer, TrainConfig};
use transmix_core::mixers::{Mixer, TransMixDims, TransMixParams};

fn episode(t: usize, n: usize, obs_dim: usize, s_dim: usize, n_actions: usize) -> Episode {
    Episode {
        n_agents: n,
        obs_dim,
        s_dim,
        n_actions,
        obs: vec![vec![vec![0.1; obs_dim]; n]; t + 1],
        state: vec![vec![0.2; s_dim]; t + 1],
        avail: vec![vec![vec![true; n_actions]; n]; t + 1],
        actions: vec![vec![0; n]; t],
        reward: vec![0.5; t],
        terminated: (0..t).map(|i| i + 1 == t).collect(),
        won: false,
    }
}

fn main() {
    let (n, obs_dim, s_dim, n_actions) = (2, 11, 9, 6);
    for (d_h, d_m, batch, t_len) in [(32, 16, 16, 20), (24, 16, 16, 15), (32, 32, 32, 25)] {
        let dims = AgentDims { obs_dim, n_actions, n_agents: n, hidden: d_h };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let agent = AgentNetParams::init(dims, &mut rng);
        let tdims = TransMixDims {
            n_agents: n, s_dim, agent_hidden: d_h,
            layers: 2, heads: 4, d_model: d_m, state_tokens: 4, d_skip: 8,
        };
        let mixer = Mixer::TransMix(TransMixParams::init(tdims, &mut rng).unwrap());
        let cfg = TrainConfig { batch_episodes: batch, ..TrainConfig::default() };
        let mut learner = Learner::new(agent, mixer, cfg);
        let mut buffer = ReplayBuffer::new(256);
        for _ in 0..batch {
            buffer.insert(episode(t_len, n, obs_dim, s_dim, n_actions)).unwrap();
        }
        let start = std::time::Instant::now();
        let steps = 20;
        for _ in 0..steps {
            learner.train_step(&buffer, &mut rng).unwrap().unwrap();
        }
        let per = start.elapsed().as_secs_f64() / steps as f64;
        println!("d_h={d_h} d_m={d_m} batch={batch} T={t_len}: {:.1} ms/step", per * 1e3);
    }
}
