//! The online collect-train-evaluate loop.
//!
//! One coordinator owns the learner, buffer and metrics; K workers each
//! own an environment instance and collect one episode per round from a
//! read-only parameter snapshot. Episodes enter the buffer in worker
//! order at round boundaries, so the collected multiset (and, with one
//! worker, the whole run) is reproducible for a fixed seed.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agent::{
    agent_step_values, assemble_input, init_hidden, select_actions, AgentNetParams,
};
use crate::envs::{Env, NoisyEnv};
use crate::error::{Error, Result};
use crate::harness::checkpoint::{save_checkpoint, Checkpoint, EnvDims};
use crate::harness::config::{ExperimentConfig, MixerKind};
use crate::harness::metrics::{MetricsRow, MetricsWriter};
use crate::learner::{epsilon_at, Episode, Learner, ReplayBuffer};
use crate::mixers::{Mixer, QmixDims, QmixParams, TransMixDims, TransMixParams};

/// Rng stream ids, kept disjoint per purpose.
const STREAM_INIT: u64 = 1;
const STREAM_TRAIN: u64 = 2;
const STREAM_NOISE_BASE: u64 = 1 << 16;
const STREAM_COLLECT_BASE: u64 = 1 << 17;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Freshly initialized networks for a config, deterministic in `seed`.
pub fn init_networks(
    cfg: &ExperimentConfig,
    dims: &EnvDims,
    seed: u64,
) -> Result<(AgentNetParams, Mixer)> {
    let mut rng = stream_rng(seed, STREAM_INIT);
    let agent = AgentNetParams::init(dims.agent_dims(cfg), &mut rng);
    let mixer = match cfg.mixer {
        MixerKind::Vdn => Mixer::Vdn,
        MixerKind::Qmix => Mixer::Qmix(QmixParams::init(
            QmixDims {
                n_agents: dims.n_agents,
                s_dim: dims.s_dim,
                embed: cfg.qmix.embed,
                hyper_hidden: cfg.qmix.hyper_hidden,
            },
            &mut rng,
        )),
        MixerKind::TransMix => {
            let t = cfg.transmix.resolve()?;
            Mixer::TransMix(TransMixParams::init(
                TransMixDims {
                    n_agents: dims.n_agents,
                    s_dim: dims.s_dim,
                    agent_hidden: cfg.agent.hidden,
                    layers: t.layers,
                    heads: t.heads,
                    d_model: t.d_model,
                    state_tokens: t.state_tokens,
                    d_skip: t.d_skip,
                },
                &mut rng,
            )?)
        }
    };
    Ok((agent, mixer))
}

fn build_env(cfg: &ExperimentConfig, seed: u64, noise_stream: u64) -> Result<Box<dyn Env>> {
    let inner = cfg.env.resolve()?.build()?;
    if cfg.noise.enabled && cfg.noise.sigma > 0.0 {
        Ok(Box::new(NoisyEnv::new(
            inner,
            cfg.noise.sigma,
            stream_rng(seed, noise_stream),
        )))
    } else {
        Ok(inner)
    }
}

/// Rolls one episode with epsilon-greedy decentralized action selection.
pub fn collect_episode(
    env: &mut dyn Env,
    params: &AgentNetParams,
    epsilon: f64,
    rng: &mut ChaCha8Rng,
    episode_seed: u64,
) -> Result<Episode> {
    let n = env.n_agents();
    let (mut obs, mut state) = env.reset(episode_seed);
    let mut avail: Vec<Vec<bool>> = (0..n).map(|i| env.avail_actions(i)).collect();
    let mut hidden = init_hidden(n, params.dims.hidden);
    let mut last_actions: Vec<Option<usize>> = vec![None; n];

    let mut ep = Episode {
        n_agents: n,
        obs_dim: env.obs_dim(),
        s_dim: env.state_dim(),
        n_actions: env.n_actions(),
        obs: vec![obs.clone()],
        state: vec![state.clone()],
        avail: vec![avail.clone()],
        actions: Vec::new(),
        reward: Vec::new(),
        terminated: Vec::new(),
        won: false,
    };

    for _ in 0..env.max_steps() {
        let inputs: Vec<Vec<f64>> = (0..n)
            .map(|i| assemble_input(&obs[i], last_actions[i], i, &params.dims))
            .collect();
        let (q, h_next) = agent_step_values(params, &inputs, &hidden)?;
        hidden = h_next;
        let joint = select_actions(&q, &avail, epsilon, rng)?;
        let result = env.step(&joint)?;

        obs = result.observations;
        state = result.state;
        avail = (0..n).map(|i| env.avail_actions(i)).collect();
        for (slot, &a) in last_actions.iter_mut().zip(&joint) {
            *slot = Some(a);
        }

        ep.obs.push(obs.clone());
        ep.state.push(state.clone());
        ep.avail.push(avail.clone());
        ep.actions.push(joint);
        ep.reward.push(result.reward);
        ep.terminated.push(result.terminated);
        if result.terminated {
            ep.won = result.won;
            break;
        }
    }
    ep.validate()?;
    Ok(ep)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOutcome {
    pub win_rate: f64,
    pub return_mean: f64,
}

/// Greedy decentralized evaluation: epsilon = 0, each agent acts from its
/// own observation and hidden state only.
pub fn run_eval(
    params: &AgentNetParams,
    env: &mut dyn Env,
    episodes: usize,
    seed_base: u64,
) -> Result<EvalOutcome> {
    let n = env.n_agents();
    let mut wins = 0usize;
    let mut total_return = 0.0;
    let mut rng = stream_rng(seed_base, 0); // unused at epsilon 0
    for e in 0..episodes {
        let (mut obs, _) = env.reset(seed_base.wrapping_add(e as u64));
        let mut avail: Vec<Vec<bool>> = (0..n).map(|i| env.avail_actions(i)).collect();
        let mut hidden = init_hidden(n, params.dims.hidden);
        let mut last_actions: Vec<Option<usize>> = vec![None; n];
        let mut ep_return = 0.0;
        for _ in 0..env.max_steps() {
            let inputs: Vec<Vec<f64>> = (0..n)
                .map(|i| assemble_input(&obs[i], last_actions[i], i, &params.dims))
                .collect();
            let (q, h_next) = agent_step_values(params, &inputs, &hidden)?;
            hidden = h_next;
            let joint = select_actions(&q, &avail, 0.0, &mut rng)?;
            let result = env.step(&joint)?;
            ep_return += result.reward;
            obs = result.observations;
            avail = (0..n).map(|i| env.avail_actions(i)).collect();
            for (slot, &a) in last_actions.iter_mut().zip(&joint) {
                *slot = Some(a);
            }
            if result.terminated {
                if result.won {
                    wins += 1;
                }
                break;
            }
        }
        total_return += ep_return;
    }
    Ok(EvalOutcome {
        win_rate: wins as f64 / episodes as f64,
        return_mean: total_return / episodes as f64,
    })
}

/// Output paths of one seed's run within the experiment directory.
pub struct RunPaths {
    pub dir: PathBuf,
    pub config: PathBuf,
    pub metrics: PathBuf,
    pub checkpoint: PathBuf,
    pub log: PathBuf,
}

impl RunPaths {
    pub fn new(out_dir: &Path, seed: u64) -> Self {
        RunPaths {
            dir: out_dir.to_path_buf(),
            config: out_dir.join("config.json"),
            metrics: out_dir.join(format!("metrics_seed{seed}.csv")),
            checkpoint: out_dir.join(format!("ckpt_seed{seed}.bin")),
            log: out_dir.join(format!("run_seed{seed}.log")),
        }
    }
}

pub struct RunOutput {
    pub paths: RunPaths,
    pub final_eval: EvalOutcome,
    pub env_steps: u64,
    pub episodes: u64,
}

/// Trains one seed to `total_env_steps`, interleaving evaluation pauses
/// and metric/log appends. `resume` continues counters, metrics and
/// parameters from a saved checkpoint.
pub fn run_train(
    cfg: &ExperimentConfig,
    seed: u64,
    resume: Option<Checkpoint>,
) -> Result<RunOutput> {
    run_train_until(cfg, seed, resume, None)
}

/// [`run_train`] with an optional early stop (an operator interruption):
/// the run halts once `env_steps` reaches the bound, leaving a resumable
/// checkpoint and a metrics prefix.
pub fn run_train_until(
    cfg: &ExperimentConfig,
    seed: u64,
    resume: Option<Checkpoint>,
    stop_after: Option<u64>,
) -> Result<RunOutput> {
    cfg.validate()?;
    let dims = EnvDims::from_config(cfg)?;
    let paths = RunPaths::new(Path::new(&cfg.out_dir), seed);
    std::fs::create_dir_all(&paths.dir)?;
    std::fs::write(&paths.config, cfg.canonical_json_pretty())?;

    let (mut learner, mut env_steps, mut episodes) = match resume {
        Some(ckpt) => {
            if ckpt.digest != cfg.digest() {
                return Err(Error::DigestMismatch {
                    expected: cfg.digest(),
                    found: ckpt.digest,
                });
            }
            (ckpt.learner, ckpt.env_steps, ckpt.episodes)
        }
        None => {
            let (agent, mixer) = init_networks(cfg, &dims, seed)?;
            (
                Learner::new(agent, mixer, cfg.train.clone()),
                0u64,
                0u64,
            )
        }
    };

    let workers = cfg.workers.max(1);
    let mut envs: Vec<Box<dyn Env>> = (0..workers)
        .map(|w| build_env(cfg, seed, STREAM_NOISE_BASE + w as u64))
        .collect::<Result<_>>()?;
    let mut worker_rngs: Vec<ChaCha8Rng> = (0..workers)
        .map(|w| stream_rng(seed, STREAM_COLLECT_BASE + w as u64))
        .collect();
    let mut eval_env = build_env(cfg, seed, STREAM_NOISE_BASE + (1 << 8))?;
    let mut train_rng = stream_rng(seed, STREAM_TRAIN);

    let mut buffer = ReplayBuffer::new(cfg.train.buffer_capacity);
    let mut metrics = MetricsWriter::open(&paths.metrics)?;
    let mut log = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&paths.log)?;
    let start = Instant::now();

    // Resume never repeats an eval already recorded for the current step.
    let interval = cfg.eval.interval_steps;
    let mut next_eval_at = if env_steps == 0 {
        0
    } else {
        (env_steps / interval + 1) * interval
    };
    let mut losses_since_eval: Vec<f64> = Vec::new();
    let mut last_eval = EvalOutcome {
        win_rate: 0.0,
        return_mean: 0.0,
    };
    let mut round: u64 = 0;

    loop {
        while env_steps >= next_eval_at {
            last_eval = run_eval(&learner.agent, eval_env.as_mut(), cfg.eval.episodes, seed ^ env_steps)?;
            let train_loss = if losses_since_eval.is_empty() {
                f64::NAN
            } else {
                losses_since_eval.iter().sum::<f64>() / losses_since_eval.len() as f64
            };
            losses_since_eval.clear();
            let row = MetricsRow {
                seed,
                env_steps,
                episodes,
                epsilon: epsilon_at(env_steps, &cfg.train),
                train_loss,
                test_return_mean: last_eval.return_mean,
                test_win_rate: last_eval.win_rate,
                wall_ms: start.elapsed().as_millis() as u64,
            };
            metrics.append(&row)?;
            writeln!(
                log,
                "eval env_steps={} episodes={} eval_episodes={} win_rate={:.4} return_mean={:.4}",
                env_steps, episodes, cfg.eval.episodes, last_eval.win_rate, last_eval.return_mean
            )?;
            // crash recovery: every eval pause leaves a resumable snapshot
            save_checkpoint(&paths.checkpoint, cfg, seed, env_steps, episodes, &learner)?;
            next_eval_at += interval;
        }
        if env_steps >= cfg.train.total_env_steps {
            break;
        }
        if stop_after.is_some_and(|bound| env_steps >= bound) {
            break;
        }

        // One collection round: K episodes from the current snapshot.
        let epsilon = epsilon_at(env_steps, &cfg.train);
        let snapshot = learner.agent.clone();
        let mut collected: Vec<Option<Result<Episode>>> = (0..workers).map(|_| None).collect();
        if workers == 1 {
            let ep_seed = seed ^ (round << 8);
            collected[0] = Some(collect_episode(
                envs[0].as_mut(),
                &snapshot,
                epsilon,
                &mut worker_rngs[0],
                ep_seed,
            ));
        } else {
            std::thread::scope(|scope| {
                for (w, ((env, rng), slot)) in envs
                    .iter_mut()
                    .zip(worker_rngs.iter_mut())
                    .zip(collected.iter_mut())
                    .enumerate()
                {
                    let snapshot = &snapshot;
                    let ep_seed = seed ^ (round << 8) ^ w as u64;
                    scope.spawn(move || {
                        *slot = Some(collect_episode(
                            env.as_mut(),
                            snapshot,
                            epsilon,
                            rng,
                            ep_seed,
                        ));
                    });
                }
            });
        }

        // Insert in worker order; one train step per collected episode.
        for slot in collected {
            let episode = slot.expect("worker filled its slot")?;
            env_steps += episode.env_steps();
            episodes += 1;
            buffer.insert(episode)?;
            if learner.maybe_sync_targets(episodes) {
                writeln!(log, "target_sync episode={episodes} env_steps={env_steps}")?;
            }
            if let Some(step) = learner.train_step(&buffer, &mut train_rng)? {
                losses_since_eval.push(step.loss);
            }
        }
        round += 1;
    }

    save_checkpoint(&paths.checkpoint, cfg, seed, env_steps, episodes, &learner)?;
    writeln!(log, "done env_steps={env_steps} episodes={episodes}")?;
    Ok(RunOutput {
        paths,
        final_eval: last_eval,
        env_steps,
        episodes,
    })
}

/// Evaluation entry point for a stored checkpoint, optionally overriding
/// the noise level.
pub fn eval_checkpoint(
    ckpt: &Checkpoint,
    episodes: usize,
    noise_sigma: Option<f64>,
) -> Result<EvalOutcome> {
    let mut cfg = ckpt.config.clone();
    if let Some(sigma) = noise_sigma {
        cfg.noise.enabled = sigma > 0.0;
        cfg.noise.sigma = sigma;
    }
    let mut env = build_env(&cfg, ckpt.seed, STREAM_NOISE_BASE + (1 << 9))?;
    run_eval(&ckpt.learner.agent, env.as_mut(), episodes, ckpt.seed)
}
