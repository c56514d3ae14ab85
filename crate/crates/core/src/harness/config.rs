//! Experiment configuration: JSON schema, defaults, validation.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::envs::{fixture, EnvSpec};
use crate::error::{Error, Result};
use crate::learner::TrainConfig;

/// Environment reference: a bundled fixture name or an inline spec.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum EnvRef {
    Fixture(String),
    Inline(EnvSpec),
}

impl EnvRef {
    pub fn resolve(&self) -> Result<EnvSpec> {
        match self {
            EnvRef::Fixture(name) => fixture(name),
            EnvRef::Inline(spec) => Ok(spec.clone()),
        }
    }

    pub fn display_name(&self) -> String {
        match self {
            EnvRef::Fixture(name) => name.clone(),
            EnvRef::Inline(EnvSpec::Matrix(_)) => "inline-matrix".into(),
            EnvRef::Inline(EnvSpec::Skirmish(_)) => "inline-skirmish".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MixerKind {
    #[serde(rename = "vdn")]
    Vdn,
    #[serde(rename = "qmix")]
    Qmix,
    #[serde(rename = "transmix")]
    TransMix,
}

impl MixerKind {
    pub fn name(&self) -> &'static str {
        match self {
            MixerKind::Vdn => "vdn",
            MixerKind::Qmix => "qmix",
            MixerKind::TransMix => "transmix",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    /// GRU hidden width.
    pub hidden: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig { hidden: 64 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct QmixConfig {
    pub embed: usize,
    pub hyper_hidden: usize,
}

impl Default for QmixConfig {
    fn default() -> Self {
        QmixConfig {
            embed: 32,
            hyper_hidden: 64,
        }
    }
}

/// TransMix dimensions. `preset` fills the base values ("desk" is the
/// default; "paper" is the full-scale setting with 4 heads, 2048-wide
/// model and 512 state tokens); explicit fields override the preset.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields, default)]
pub struct TransMixConfig {
    pub preset: Option<String>,
    pub layers: Option<usize>,
    pub heads: Option<usize>,
    pub d_model: Option<usize>,
    pub state_tokens: Option<usize>,
    pub d_skip: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransMixResolved {
    pub layers: usize,
    pub heads: usize,
    pub d_model: usize,
    pub state_tokens: usize,
    pub d_skip: usize,
}

impl TransMixConfig {
    pub fn resolve(&self) -> Result<TransMixResolved> {
        let base = match self.preset.as_deref() {
            None | Some("desk") => TransMixResolved {
                layers: 2,
                heads: 4,
                d_model: 32,
                state_tokens: 4,
                d_skip: 16,
            },
            Some("paper") => TransMixResolved {
                layers: 2,
                heads: 4,
                d_model: 2048,
                state_tokens: 512,
                d_skip: 512,
            },
            Some(other) => {
                return Err(Error::Config(format!(
                    "transmix.preset: unknown preset '{other}' (desk, paper)"
                )))
            }
        };
        let r = TransMixResolved {
            layers: self.layers.unwrap_or(base.layers),
            heads: self.heads.unwrap_or(base.heads),
            d_model: self.d_model.unwrap_or(base.d_model),
            state_tokens: self.state_tokens.unwrap_or(base.state_tokens),
            d_skip: self.d_skip.unwrap_or(base.d_skip),
        };
        if !(2..=6).contains(&r.layers) {
            return Err(Error::Config(format!(
                "transmix.layers: {} outside the supported stack depth 2..=6",
                r.layers
            )));
        }
        if r.heads == 0 || r.d_model % r.heads != 0 {
            return Err(Error::Config(format!(
                "transmix.d_model: {} not divisible by transmix.heads {}",
                r.d_model, r.heads
            )));
        }
        if r.state_tokens == 0 || r.d_skip == 0 {
            return Err(Error::Config(
                "transmix.state_tokens and transmix.d_skip must be positive".into(),
            ));
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub interval_steps: u64,
    pub episodes: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            interval_steps: 10_000,
            episodes: 20,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub enabled: bool,
    pub sigma: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            enabled: false,
            sigma: 0.05,
        }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3, 4, 5]
}

fn default_workers() -> usize {
    1
}

fn default_out_dir() -> String {
    "runs/out".into()
}

/// One training experiment: environment, mixer, dimensions, schedules,
/// evaluation protocol, seeds.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvRef,
    pub mixer: MixerKind,
    #[serde(default)]
    pub agent: AgentConfig,
    #[serde(default)]
    pub qmix: QmixConfig,
    #[serde(default)]
    pub transmix: TransMixConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.env.resolve()?;
        self.train.validate()?;
        if self.mixer == MixerKind::TransMix {
            self.transmix.resolve()?;
        }
        if self.agent.hidden == 0 {
            return Err(Error::Config("agent.hidden must be positive".into()));
        }
        if self.qmix.embed == 0 || self.qmix.hyper_hidden == 0 {
            return Err(Error::Config("qmix dims must be positive".into()));
        }
        if self.eval.episodes == 0 {
            return Err(Error::Config("eval.episodes must be at least 1".into()));
        }
        if self.eval.interval_steps == 0 {
            return Err(Error::Config("eval.interval_steps must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must be non-empty".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if self.noise.sigma < 0.0 || !self.noise.sigma.is_finite() {
            return Err(Error::Config(format!(
                "noise.sigma must be a non-negative real, got {}",
                self.noise.sigma
            )));
        }
        Ok(())
    }

    /// Canonical JSON of everything that defines the experiment's results.
    /// `out_dir` is storage placement, not identity, so it is cleared.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.out_dir = String::new();
        serde_json::to_string(&c).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON, hex-encoded.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.canonical_json().as_bytes());
        hex::encode(hasher.finalize())
    }

    /// Human-readable JSON with the real `out_dir`, for `config.json`
    /// files written next to run outputs.
    pub fn canonical_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

/// Parses and validates a config file. Unknown keys are rejected with the
/// offending key and line reported by the parser.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = serde_json::from_str(text)
        .map_err(|e| Error::Config(format!("{e}")))?;
    cfg.validate()?;
    Ok(cfg)
}
