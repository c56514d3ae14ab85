//! Joint action-value mixing networks.
//!
//! A mixer maps the per-agent chosen-action values (plus whatever context
//! it wants: agent histories, global state) to the joint value `Q_tot`.
//! Three mixers are provided: [`vdn`] (plain sum), [`qmix`] (monotonic
//! state-conditioned hypernetwork), and [`transmix`] (stacked
//! additive-attention encoder, unconstrained).

pub mod qmix;
pub mod transmix;
pub mod vdn;

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::ParamSet;
use crate::numerics::tape::{NodeId, Tape};
use crate::numerics::tensor::Tensor;

pub use qmix::{QmixDims, QmixParams};
pub use transmix::{
    additive_attention, additive_attention_values, transmix_layer_values, TransMixDims,
    TransMixParams,
};
pub use vdn::vdn_forward;

/// One evaluation point for a mixer: chosen-action values, agent GRU
/// hidden states, and the global state.
#[derive(Debug, Clone)]
pub struct MixerInput {
    pub q: Vec<f64>,
    pub histories: Vec<Vec<f64>>,
    pub state: Vec<f64>,
}

/// A mixing network together with its parameters.
#[derive(Debug, Clone)]
pub enum Mixer {
    Vdn,
    Qmix(QmixParams),
    TransMix(TransMixParams),
}

/// Tape bindings of a mixer's parameters for one forward pass.
pub enum MixerNodes {
    Vdn,
    Qmix(qmix::QmixNodes),
    TransMix(transmix::TransMixNodes),
}

impl MixerNodes {
    /// Node ids in [`ParamSet::named`] order, for gradient collection.
    pub fn flat(&self) -> Vec<NodeId> {
        match self {
            MixerNodes::Vdn => Vec::new(),
            MixerNodes::Qmix(n) => vec![
                n.hyper_w1_w, n.hyper_w1_b, n.hyper_b1_w, n.hyper_b1_b, n.hyper_w2_w,
                n.hyper_w2_b, n.v_w1, n.v_b1, n.v_w2, n.v_b2,
            ],
            MixerNodes::TransMix(n) => {
                let mut out = Vec::new();
                for l in &n.layers {
                    out.extend([l.state_w, l.state_b, l.q_w, l.q_b, l.w_alpha, l.w_beta, l.res_w]);
                }
                out.extend([n.hist_w, n.hist_b, n.skip_w, n.skip_b, n.head_w, n.head_b]);
                out
            }
        }
    }
}

impl Mixer {
    pub fn bind(&self, tape: &mut Tape) -> MixerNodes {
        match self {
            Mixer::Vdn => MixerNodes::Vdn,
            Mixer::Qmix(p) => MixerNodes::Qmix(p.bind(tape)),
            Mixer::TransMix(p) => MixerNodes::TransMix(p.bind(tape)),
        }
    }

    /// Builds the batched mixing graph.
    ///
    /// `q` is `[B, n]`, `histories` is `[B, n, d_h]`, `state` is `[B, s]`.
    /// Returns `Q_tot` as `[B]`.
    pub fn forward_graph(
        &self,
        tape: &mut Tape,
        nodes: &MixerNodes,
        q: NodeId,
        histories: NodeId,
        state: NodeId,
    ) -> Result<NodeId> {
        match (self, nodes) {
            (Mixer::Vdn, MixerNodes::Vdn) => vdn::vdn_graph(tape, q),
            (Mixer::Qmix(p), MixerNodes::Qmix(n)) => p.forward_graph(tape, n, q, state),
            (Mixer::TransMix(p), MixerNodes::TransMix(n)) => {
                p.forward_graph(tape, n, q, histories, state)
            }
            _ => Err(Error::InvalidArgument(
                "mixer nodes bound from a different mixer".into(),
            )),
        }
    }

    /// Value-only forward over a batch of inputs (no gradients kept).
    pub fn forward_values(&self, inputs: &[MixerInput]) -> Result<Vec<f64>> {
        if inputs.is_empty() {
            return Ok(Vec::new());
        }
        let b = inputs.len();
        let n = inputs[0].q.len();
        let d_h = inputs[0].histories.first().map_or(0, |h| h.len());
        let s_dim = inputs[0].state.len();
        let mut tape = Tape::new();
        let nodes = self.bind(&mut tape);
        let mut qf = Vec::with_capacity(b * n);
        let mut hf = Vec::with_capacity(b * n * d_h);
        let mut sf = Vec::with_capacity(b * s_dim);
        for inp in inputs {
            if inp.q.len() != n || inp.histories.len() != n || inp.state.len() != s_dim {
                return Err(Error::shape(
                    "mixer",
                    "inconsistent batch entry dimensions".to_string(),
                ));
            }
            qf.extend_from_slice(&inp.q);
            for h in &inp.histories {
                hf.extend_from_slice(h);
            }
            sf.extend_from_slice(&inp.state);
        }
        let q = tape.constant(qf, vec![b, n])?;
        let h = tape.constant(hf, vec![b, n, d_h])?;
        let s = tape.constant(sf, vec![b, s_dim])?;
        let out = self.forward_graph(&mut tape, &nodes, q, h, s)?;
        Ok(tape.value(out).to_vec())
    }

    /// Single-point convenience wrapper.
    pub fn forward_one(&self, input: &MixerInput) -> Result<f64> {
        Ok(self.forward_values(std::slice::from_ref(input))?[0])
    }

    /// Gradient of `Q_tot` with respect to each `q_i` at one input point.
    pub fn grad_wrt_q(&self, input: &MixerInput) -> Result<Vec<f64>> {
        let n = input.q.len();
        let q_param = Tensor::new(input.q.clone(), vec![1, n])?.with_grad();
        let d_h = input.histories.first().map_or(0, |h| h.len());
        let mut tape = Tape::new();
        let nodes = self.bind(&mut tape);
        let q = tape.param(&q_param);
        let mut hf = Vec::with_capacity(n * d_h);
        for h in &input.histories {
            hf.extend_from_slice(h);
        }
        let h = tape.constant(hf, vec![1, n, d_h])?;
        let s = tape.constant(input.state.clone(), vec![1, input.state.len()])?;
        let out = self.forward_graph(&mut tape, &nodes, q, h, s)?;
        let loss = tape.sum_all(out);
        tape.backward(loss)?;
        Ok(tape.grad(q).unwrap_or(&vec![0.0; n]).to_vec())
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Mixer::Vdn => "vdn",
            Mixer::Qmix(_) => "qmix",
            Mixer::TransMix(_) => "transmix",
        }
    }
}

impl ParamSet for Mixer {
    fn named(&self) -> Vec<(String, &Tensor)> {
        match self {
            Mixer::Vdn => Vec::new(),
            Mixer::Qmix(p) => p.named(),
            Mixer::TransMix(p) => p.named(),
        }
    }

    fn named_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        match self {
            Mixer::Vdn => Vec::new(),
            Mixer::Qmix(p) => p.named_mut(),
            Mixer::TransMix(p) => p.named_mut(),
        }
    }
}

/// Random mixer inputs for property tests.
pub fn random_input(n_agents: usize, d_h: usize, s_dim: usize, rng: &mut impl Rng) -> MixerInput {
    MixerInput {
        q: (0..n_agents).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        histories: (0..n_agents)
            .map(|_| (0..d_h).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect(),
        state: (0..s_dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    }
}
