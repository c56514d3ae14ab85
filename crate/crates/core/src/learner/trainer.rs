//! TD targets, the masked TD loss, and the joint training step.

use rand::Rng;

use crate::agent::{agent_forward_step, assemble_input, masked_argmax, AgentNetParams};
use crate::error::{Error, Result};
use crate::learner::buffer::ReplayBuffer;
use crate::learner::episode::EpisodeBatch;
use crate::learner::schedule::{LossMode, TrainConfig};
use crate::mixers::Mixer;
use crate::nn::ParamSet;
use crate::numerics::adam::{adam_step, AdamState};
use crate::numerics::tape::{NodeId, Tape};

/// Assembled agent inputs for one timestep: `[b * n, input_dim]`,
/// batch-major then agent.
fn step_inputs(batch: &EpisodeBatch, agent: &AgentNetParams, t: usize) -> Vec<f64> {
    let dims = &agent.dims;
    let mut out = Vec::with_capacity(batch.b * batch.n_agents * dims.input_dim());
    for b in 0..batch.b {
        for i in 0..batch.n_agents {
            out.extend(assemble_input(
                batch.obs(b, t, i),
                batch.prev_action(b, t, i),
                i,
                dims,
            ));
        }
    }
    out
}

fn step_states(batch: &EpisodeBatch, t: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(batch.b * batch.s_dim);
    for b in 0..batch.b {
        out.extend_from_slice(batch.state(b, t));
    }
    out
}

/// TD targets from the target networks, one per `(episode, step)`.
///
/// The target agent is unrolled over every episode; at each lookahead step
/// the greedy per-agent actions (masked argmax) feed the target mixer, and
/// `y_t = r_t + gamma * (1 - terminated_t) * Q_tot^-(t+1)`. Plain values
/// only: nothing here can carry gradient back to the live networks.
pub fn compute_targets(
    batch: &EpisodeBatch,
    target_agent: &AgentNetParams,
    target_mixer: &Mixer,
    gamma: f64,
) -> Result<Vec<f64>> {
    let (b, n, t_max) = (batch.b, batch.n_agents, batch.t_max);
    let d = target_agent.dims.hidden;
    let n_actions = batch.n_actions;
    let input_dim = target_agent.dims.input_dim();

    let mut tape = Tape::new();
    let agent_nodes = target_agent.bind(&mut tape);
    let mixer_nodes = target_mixer.bind(&mut tape);
    let mut h = tape.constant(vec![0.0; b * n * d], vec![b * n, d])?;

    let mut qtot_next = vec![vec![0.0; b]; t_max + 1];
    for t in 0..=t_max {
        let x = tape.constant(step_inputs(batch, target_agent, t), vec![b * n, input_dim])?;
        let (q, h_next) = agent_forward_step(&mut tape, &agent_nodes, x, h)?;
        h = h_next;
        if t >= 1 {
            let qv = tape.value(q);
            let mut chosen = vec![0.0; b * n];
            for row in 0..b * n {
                let (bi, ai) = (row / n, row % n);
                let qrow = &qv[row * n_actions..(row + 1) * n_actions];
                let a_star = masked_argmax(qrow, batch.avail(bi, t, ai))?;
                chosen[row] = qrow[a_star];
            }
            let qn = tape.constant(chosen, vec![b, n])?;
            let hn = tape.reshape(h, vec![b, n, d])?;
            let st = tape.constant(step_states(batch, t), vec![b, batch.s_dim])?;
            let qtot = target_mixer.forward_graph(&mut tape, &mixer_nodes, qn, hn, st)?;
            qtot_next[t].copy_from_slice(tape.value(qtot));
        }
    }

    let mut y = vec![0.0; b * t_max];
    for bi in 0..b {
        for t in 0..t_max {
            let boot = gamma * (1.0 - batch.terminated(bi, t)) * qtot_next[t + 1][bi];
            y[bi * t_max + t] = batch.reward(bi, t) + boot;
        }
    }
    Ok(y)
}

/// A recorded TD-loss forward pass, ready for backward.
pub struct LossGraph {
    pub tape: Tape,
    pub loss: NodeId,
    pub loss_value: f64,
    pub agent_ids: Vec<NodeId>,
    pub mixer_ids: Vec<NodeId>,
}

/// Records the masked TD loss over a batch:
/// `L = sum_{b,t} filled * (y - Q_tot)^2 / normalizer`, where the
/// normalizer is the filled count (masked mean) or one (masked sum).
pub fn build_td_loss(
    batch: &EpisodeBatch,
    agent: &AgentNetParams,
    mixer: &Mixer,
    y: &[f64],
    mode: LossMode,
) -> Result<LossGraph> {
    let (b, n, t_max) = (batch.b, batch.n_agents, batch.t_max);
    let d = agent.dims.hidden;
    let n_actions = batch.n_actions;
    let input_dim = agent.dims.input_dim();
    if y.len() != b * t_max {
        return Err(Error::shape(
            "td_loss",
            format!("targets have {} entries, batch needs {}", y.len(), b * t_max),
        ));
    }
    let denom = batch.filled_total();
    if denom == 0.0 {
        return Err(Error::InvalidArgument(
            "batch has an all-zero filled mask".into(),
        ));
    }

    let mut tape = Tape::new();
    let agent_nodes = agent.bind(&mut tape);
    let mixer_nodes = mixer.bind(&mut tape);
    let agent_ids = agent_nodes.flat();
    let mixer_ids = mixer_nodes.flat();

    let mut h = tape.constant(vec![0.0; b * n * d], vec![b * n, d])?;
    let mut total: Option<NodeId> = None;
    for t in 0..t_max {
        let x = tape.constant(step_inputs(batch, agent, t), vec![b * n, input_dim])?;
        let (q, h_next) = agent_forward_step(&mut tape, &agent_nodes, x, h)?;
        h = h_next;

        // chosen-action values via one-hot masking
        let mut onehot = vec![0.0; b * n * n_actions];
        for row in 0..b * n {
            let (bi, ai) = (row / n, row % n);
            onehot[row * n_actions + batch.action(bi, t, ai)] = 1.0;
        }
        let mask = tape.constant(onehot, vec![b * n, n_actions])?;
        let picked = tape.mul(q, mask)?;
        let chosen = tape.sum_axis(picked, 1, false)?; // [b*n]
        let qn = tape.reshape(chosen, vec![b, n])?;
        let hn = tape.reshape(h, vec![b, n, d])?;
        let st = tape.constant(step_states(batch, t), vec![b, batch.s_dim])?;
        let qtot = mixer.forward_graph(&mut tape, &mixer_nodes, qn, hn, st)?;

        let y_t: Vec<f64> = (0..b).map(|bi| y[bi * t_max + t]).collect();
        let y_node = tape.constant(y_t, vec![b])?;
        let filled_t: Vec<f64> = (0..b).map(|bi| batch.filled(bi, t)).collect();
        let filled_node = tape.constant(filled_t, vec![b])?;
        let diff = tape.sub(qtot, y_node)?;
        let sq = tape.mul(diff, diff)?;
        let masked = tape.mul(sq, filled_node)?;
        let term = tape.sum_all(masked);
        total = Some(match total {
            Some(acc) => tape.add(acc, term)?,
            None => term,
        });
    }
    let total = total.expect("t_max >= 1 for validated batches");
    let loss = match mode {
        LossMode::MaskedMean => tape.scale(total, 1.0 / denom),
        LossMode::MaskedSum => total,
    };
    let loss_value = tape.value(loss)[0];
    Ok(LossGraph {
        tape,
        loss,
        loss_value,
        agent_ids,
        mixer_ids,
    })
}

/// Scalar TD loss (no gradients), for tests and diagnostics.
pub fn td_loss(
    batch: &EpisodeBatch,
    agent: &AgentNetParams,
    mixer: &Mixer,
    y: &[f64],
    mode: LossMode,
) -> Result<f64> {
    Ok(build_td_loss(batch, agent, mixer, y, mode)?.loss_value)
}

#[derive(Debug, Clone, Copy)]
pub struct StepMetrics {
    pub loss: f64,
    pub grad_norm: f64,
}

/// Live and target networks, the optimizer, and the sync bookkeeping.
pub struct Learner {
    pub agent: AgentNetParams,
    pub mixer: Mixer,
    pub target_agent: AgentNetParams,
    pub target_mixer: Mixer,
    pub opt: AdamState,
    pub cfg: TrainConfig,
    synced_bucket: u64,
}

impl Learner {
    pub fn new(agent: AgentNetParams, mixer: Mixer, cfg: TrainConfig) -> Self {
        let mut sizes = agent.sizes();
        sizes.extend(mixer.sizes());
        let opt = AdamState::new(&sizes, cfg.lr);
        Learner {
            target_agent: agent.clone(),
            target_mixer: mixer.clone(),
            agent,
            mixer,
            opt,
            cfg,
            synced_bucket: 0,
        }
    }

    /// Copies live parameters into the targets whenever `episode_count`
    /// has crossed a fresh multiple of `target_update_episodes`.
    /// Returns true when a sync happened.
    pub fn maybe_sync_targets(&mut self, episode_count: u64) -> bool {
        let bucket = episode_count / self.cfg.target_update_episodes;
        if bucket > self.synced_bucket {
            self.synced_bucket = bucket;
            self.sync_targets();
            true
        } else {
            false
        }
    }

    pub fn sync_targets(&mut self) {
        self.target_agent.copy_values_from(&self.agent);
        self.target_mixer.copy_values_from(&self.mixer);
    }

    /// Marks sync bookkeeping as caught up to `episode_count` without
    /// copying (checkpoint resume).
    pub fn mark_synced_through(&mut self, episode_count: u64) {
        self.synced_bucket = episode_count / self.cfg.target_update_episodes;
    }

    /// One optimization step: sample, build targets, backprop the masked
    /// TD loss, and apply Adam jointly to agent and mixer parameters.
    /// Returns `None` while the buffer cannot fill a batch.
    pub fn train_step(
        &mut self,
        buffer: &ReplayBuffer,
        rng: &mut impl Rng,
    ) -> Result<Option<StepMetrics>> {
        let batch = match buffer.sample(self.cfg.batch_episodes, rng) {
            Some(b) => b,
            None => return Ok(None),
        };
        let y = compute_targets(&batch, &self.target_agent, &self.target_mixer, self.cfg.gamma)?;

        self.agent.zero_grads();
        self.mixer.zero_grads();
        let mut graph = build_td_loss(&batch, &self.agent, &self.mixer, &y, self.cfg.loss_mode)?;
        if !graph.loss_value.is_finite() {
            return Err(Error::NonFinite(format!(
                "training loss {}; aborting",
                graph.loss_value
            )));
        }
        graph.tape.backward(graph.loss)?;
        for ((_, t), id) in self.agent.named_mut().into_iter().zip(&graph.agent_ids) {
            if let Some(g) = graph.tape.grad(*id) {
                t.accumulate_grad(g);
            }
        }
        for ((_, t), id) in self.mixer.named_mut().into_iter().zip(&graph.mixer_ids) {
            if let Some(g) = graph.tape.grad(*id) {
                t.accumulate_grad(g);
            }
        }

        let grad_norm = {
            let mut sq = 0.0;
            for (_, t) in self.agent.named().into_iter().chain(self.mixer.named()) {
                if let Some(g) = t.grad() {
                    sq += g.iter().map(|v| v * v).sum::<f64>();
                }
            }
            sq.sqrt()
        };
        if let Some(clip) = self.cfg.grad_clip_norm {
            if grad_norm > clip {
                let f = clip / grad_norm;
                self.agent.scale_grads(f);
                self.mixer.scale_grads(f);
            }
        }

        let mut refs: Vec<&mut crate::numerics::tensor::Tensor> = Vec::new();
        for (_, t) in self.agent.named_mut() {
            refs.push(t);
        }
        for (_, t) in self.mixer.named_mut() {
            refs.push(t);
        }
        adam_step(&mut refs, &mut self.opt)?;

        Ok(Some(StepMetrics {
            loss: graph.loss_value,
            grad_norm,
        }))
    }
}
