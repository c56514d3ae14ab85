//! Binary checkpoints.
//!
//! Layout: an 8-byte little-endian header length, a UTF-8 JSON header
//! (config, digest, counters, parameter names and shapes), then the raw
//! payload of little-endian f64 values: live parameters in declared
//! order, target parameters mirroring them, then the Adam first and
//! second moments. Save -> load -> save is byte-identical.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::{AgentDims, AgentNetParams};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, MixerKind};
use crate::learner::Learner;
use crate::mixers::{Mixer, QmixDims, QmixParams, TransMixDims, TransMixParams};
use crate::nn::ParamSet;

#[derive(Debug, Serialize, Deserialize)]
struct ParamMeta {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    digest: String,
    config: ExperimentConfig,
    seed: u64,
    env_steps: u64,
    episodes: u64,
    adam_t: u64,
    params: Vec<ParamMeta>,
}

/// A loaded checkpoint: enough to resume training or run evaluation.
pub struct Checkpoint {
    pub config: ExperimentConfig,
    pub digest: String,
    pub seed: u64,
    pub env_steps: u64,
    pub episodes: u64,
    pub learner: Learner,
}

/// Environment dimensions a config implies; needed to shape the networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnvDims {
    pub n_agents: usize,
    pub n_actions: usize,
    pub obs_dim: usize,
    pub s_dim: usize,
}

impl EnvDims {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let env = cfg.env.resolve()?.build()?;
        Ok(EnvDims {
            n_agents: env.n_agents(),
            n_actions: env.n_actions(),
            obs_dim: env.obs_dim(),
            s_dim: env.state_dim(),
        })
    }

    pub fn agent_dims(&self, cfg: &ExperimentConfig) -> AgentDims {
        AgentDims {
            obs_dim: self.obs_dim,
            n_actions: self.n_actions,
            n_agents: self.n_agents,
            hidden: cfg.agent.hidden,
        }
    }
}

/// Zero-valued networks of the right shapes for a config (checkpoint
/// loading fills them in).
pub fn zero_networks(cfg: &ExperimentConfig, dims: &EnvDims) -> Result<(AgentNetParams, Mixer)> {
    let agent = AgentNetParams::zeros(dims.agent_dims(cfg));
    let mixer = match cfg.mixer {
        MixerKind::Vdn => Mixer::Vdn,
        MixerKind::Qmix => Mixer::Qmix(QmixParams::zeros(QmixDims {
            n_agents: dims.n_agents,
            s_dim: dims.s_dim,
            embed: cfg.qmix.embed,
            hyper_hidden: cfg.qmix.hyper_hidden,
        })),
        MixerKind::TransMix => {
            let t = cfg.transmix.resolve()?;
            Mixer::TransMix(TransMixParams::zeros(TransMixDims {
                n_agents: dims.n_agents,
                s_dim: dims.s_dim,
                agent_hidden: cfg.agent.hidden,
                layers: t.layers,
                heads: t.heads,
                d_model: t.d_model,
                state_tokens: t.state_tokens,
                d_skip: t.d_skip,
            })?)
        }
    };
    Ok((agent, mixer))
}

fn push_values(payload: &mut Vec<u8>, params: &impl ParamSet) {
    for (_, t) in params.named() {
        for v in t.data() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
}

pub fn save_checkpoint(
    path: &Path,
    config: &ExperimentConfig,
    seed: u64,
    env_steps: u64,
    episodes: u64,
    learner: &Learner,
) -> Result<()> {
    let mut params = Vec::new();
    for (name, t) in learner.agent.named().into_iter().chain(learner.mixer.named()) {
        params.push(ParamMeta {
            name,
            shape: t.shape().to_vec(),
        });
    }
    let header = Header {
        version: 1,
        digest: config.digest(),
        config: config.clone(),
        seed,
        env_steps,
        episodes,
        adam_t: learner.opt.step_count(),
        params,
    };
    let header_bytes = serde_json::to_vec(&header)?;

    let mut payload = Vec::new();
    push_values(&mut payload, &learner.agent);
    push_values(&mut payload, &learner.mixer);
    push_values(&mut payload, &learner.target_agent);
    push_values(&mut payload, &learner.target_mixer);
    let (m, v) = learner.opt.moments();
    for arr in m.iter().chain(v.iter()) {
        for x in arr {
            payload.extend_from_slice(&x.to_le_bytes());
        }
    }

    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
        f.write_all(&header_bytes)?;
        f.write_all(&payload)?;
        f.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn take_values(cursor: &mut &[u8], params: &mut impl ParamSet) -> Result<()> {
    for (name, t) in params.named_mut() {
        let n = t.data().len();
        let need = n * 8;
        if cursor.len() < need {
            return Err(Error::Checkpoint(format!(
                "payload exhausted while reading {name}"
            )));
        }
        let (head, rest) = cursor.split_at(need);
        for (dst, chunk) in t.data_mut().iter_mut().zip(head.chunks_exact(8)) {
            *dst = f64::from_le_bytes(chunk.try_into().unwrap());
        }
        *cursor = rest;
    }
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut file = std::fs::File::open(path)?;
    let mut len_bytes = [0u8; 8];
    file.read_exact(&mut len_bytes)
        .map_err(|_| Error::Checkpoint("file too short for header length".into()))?;
    let header_len = u64::from_le_bytes(len_bytes) as usize;
    let mut header_bytes = vec![0u8; header_len];
    file.read_exact(&mut header_bytes)
        .map_err(|_| Error::Checkpoint("truncated header".into()))?;
    let header: Header = serde_json::from_slice(&header_bytes)?;
    if header.version != 1 {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {}",
            header.version
        )));
    }
    let expected = header.config.digest();
    if expected != header.digest {
        return Err(Error::DigestMismatch {
            expected,
            found: header.digest,
        });
    }

    let mut payload = Vec::new();
    file.read_to_end(&mut payload)?;

    let dims = EnvDims::from_config(&header.config)?;
    let (agent, mixer) = zero_networks(&header.config, &dims)?;

    // validate recorded metadata against the reconstructed shapes
    let expected_meta: Vec<(String, Vec<usize>)> = agent
        .named()
        .into_iter()
        .chain(mixer.named())
        .map(|(n, t)| (n, t.shape().to_vec()))
        .collect();
    if expected_meta.len() != header.params.len()
        || expected_meta
            .iter()
            .zip(&header.params)
            .any(|((n, s), m)| *n != m.name || *s != m.shape)
    {
        return Err(Error::Checkpoint(
            "parameter names/shapes do not match the config".into(),
        ));
    }

    let mut learner = Learner::new(agent, mixer, header.config.train.clone());
    let mut cursor: &[u8] = &payload;
    take_values(&mut cursor, &mut learner.agent)?;
    take_values(&mut cursor, &mut learner.mixer)?;
    take_values(&mut cursor, &mut learner.target_agent)?;
    take_values(&mut cursor, &mut learner.target_mixer)?;

    let sizes: Vec<usize> = learner.agent.sizes().into_iter().chain(learner.mixer.sizes()).collect();
    let read_moments = |cursor: &mut &[u8]| -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(sizes.len());
        for &n in &sizes {
            let need = n * 8;
            if cursor.len() < need {
                return Err(Error::Checkpoint("payload exhausted in optimizer state".into()));
            }
            let (head, rest) = cursor.split_at(need);
            out.push(
                head.chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            );
            *cursor = rest;
        }
        Ok(out)
    };
    let m = read_moments(&mut cursor)?;
    let v = read_moments(&mut cursor)?;
    if !cursor.is_empty() {
        return Err(Error::Checkpoint(format!(
            "{} unexpected trailing bytes",
            cursor.len()
        )));
    }
    learner.opt.restore(m, v, header.adam_t);
    learner.mark_synced_through(header.episodes);

    Ok(Checkpoint {
        config: header.config,
        digest: header.digest,
        seed: header.seed,
        env_steps: header.env_steps,
        episodes: header.episodes,
        learner,
    })
}
