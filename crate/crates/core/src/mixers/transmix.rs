//! TransMix: additive-attention transformer mixing.
//!
//! The mixer contextualizes per-agent values against the global state and
//! the agents' recurrent histories through a stack of encoder layers. Each
//! layer forms a global query from state tokens, a global key from
//! query-modulated agent values, and modulates the flowing value tokens,
//! with a residual path. Additive attention (score-then-convex-sum) keeps
//! every step linear in the token count. No weight is generated from the
//! state by a hypernetwork, and no monotonicity constraint is applied: the
//! output head is an unbounded linear read-out of the pooled streams plus
//! a bottlenecked skip over `[q_i ; h_i]`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{glorot, uniform, zero_bias, ParamSet};
use crate::numerics::tape::{NodeId, Tape};
use crate::numerics::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransMixDims {
    pub n_agents: usize,
    pub s_dim: usize,
    /// Width of the agent history vectors fed to the value stream.
    pub agent_hidden: usize,
    pub layers: usize,
    pub heads: usize,
    pub d_model: usize,
    /// Number of tokens the embedded state is split into.
    pub state_tokens: usize,
    pub d_skip: usize,
}

impl TransMixDims {
    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 || self.d_model % self.heads != 0 {
            return Err(Error::InvalidArgument(format!(
                "d_model {} must be divisible by heads {}",
                self.d_model, self.heads
            )));
        }
        if self.layers == 0 || self.state_tokens == 0 || self.n_agents == 0 {
            return Err(Error::InvalidArgument(
                "transmix needs at least one layer, one state token and one agent".into(),
            ));
        }
        Ok(())
    }
}

/// Per-layer transforms. The value stream flows between layers; state and
/// agent values are re-embedded by every layer.
#[derive(Debug, Clone)]
pub struct TransMixLayerParams {
    pub state_w: Tensor,
    pub state_b: Tensor,
    pub q_w: Tensor,
    pub q_b: Tensor,
    /// `[1, 1, H, d_head]`, ready to broadcast over `[B, T, H, d_head]`.
    pub w_alpha: Tensor,
    pub w_beta: Tensor,
    pub res_w: Tensor,
}

#[derive(Debug, Clone)]
pub struct TransMixParams {
    pub dims: TransMixDims,
    pub layers: Vec<TransMixLayerParams>,
    pub hist_w: Tensor,
    pub hist_b: Tensor,
    pub skip_w: Tensor,
    pub skip_b: Tensor,
    pub head_w: Tensor,
    pub head_b: Tensor,
}

impl TransMixParams {
    /// Training initialization. Mostly Glorot, with one deliberate bias:
    /// the skip bottleneck's agent-value row and the head weights reading
    /// the skip block start strictly positive, so dQ_tot/dq_i > 0 when
    /// training begins. Early TD updates then order per-agent values the
    /// same way the joint value moves; without this the regression is
    /// free to lock in an inverted map of q_i (the fit is just as good)
    /// and greedy decentralized execution decodes garbage. Nothing is
    /// clamped afterwards: the trained mixer remains unconstrained.
    pub fn init(dims: TransMixDims, rng: &mut impl Rng) -> Result<Self> {
        dims.validate()?;
        let dm = dims.d_model;
        let dh = dims.head_dim();
        let att_limit = 1.0 / (dh as f64).sqrt();
        let layers = (0..dims.layers)
            .map(|_| TransMixLayerParams {
                state_w: glorot(dims.s_dim, dims.state_tokens * dm, rng),
                state_b: zero_bias(dims.state_tokens * dm),
                q_w: glorot(1, dm, rng),
                q_b: zero_bias(dm),
                w_alpha: uniform(&[1, 1, dims.heads, dh], att_limit, rng),
                w_beta: uniform(&[1, 1, dims.heads, dh], att_limit, rng),
                res_w: glorot(dm, dm, rng),
            })
            .collect();
        let mut skip_w = glorot(1 + dims.agent_hidden, dims.d_skip, rng);
        let skip_limit = (6.0 / (1 + dims.agent_hidden + dims.d_skip) as f64).sqrt();
        for v in skip_w.data_mut()[..dims.d_skip].iter_mut() {
            *v = rng.gen_range(0.5 * skip_limit..skip_limit);
        }
        let mut head_w = glorot(2 * dm + dims.d_skip, 1, rng);
        let head_limit = (6.0 / (2 * dm + dims.d_skip + 1) as f64).sqrt();
        for v in head_w.data_mut()[2 * dm..].iter_mut() {
            *v = rng.gen_range(0.5 * head_limit..head_limit);
        }
        Ok(TransMixParams {
            dims,
            layers,
            hist_w: glorot(dims.agent_hidden, dm, rng),
            hist_b: zero_bias(dm),
            skip_w,
            skip_b: zero_bias(dims.d_skip),
            head_w,
            head_b: zero_bias(1),
        })
    }

    /// Sign-symmetric random parameters (no training bias): every tensor
    /// uniform in `[-scale, scale]`. This is the draw distribution for
    /// architecture-level properties such as the existence of negative
    /// value gradients.
    pub fn random(dims: TransMixDims, scale: f64, rng: &mut impl Rng) -> Result<Self> {
        let mut params = Self::zeros(dims)?;
        for (_, t) in crate::nn::ParamSet::named_mut(&mut params) {
            for v in t.data_mut() {
                *v = rng.gen_range(-scale..scale);
            }
        }
        Ok(params)
    }

    pub fn zeros(dims: TransMixDims) -> Result<Self> {
        dims.validate()?;
        let dm = dims.d_model;
        let dh = dims.head_dim();
        let layers = (0..dims.layers)
            .map(|_| TransMixLayerParams {
                state_w: Tensor::zeros(&[dims.s_dim, dims.state_tokens * dm]).with_grad(),
                state_b: zero_bias(dims.state_tokens * dm),
                q_w: Tensor::zeros(&[1, dm]).with_grad(),
                q_b: zero_bias(dm),
                w_alpha: Tensor::zeros(&[1, 1, dims.heads, dh]).with_grad(),
                w_beta: Tensor::zeros(&[1, 1, dims.heads, dh]).with_grad(),
                res_w: Tensor::zeros(&[dm, dm]).with_grad(),
            })
            .collect();
        Ok(TransMixParams {
            dims,
            layers,
            hist_w: Tensor::zeros(&[dims.agent_hidden, dm]).with_grad(),
            hist_b: zero_bias(dm),
            skip_w: Tensor::zeros(&[1 + dims.agent_hidden, dims.d_skip]).with_grad(),
            skip_b: zero_bias(dims.d_skip),
            head_w: Tensor::zeros(&[2 * dm + dims.d_skip, 1]).with_grad(),
            head_b: zero_bias(1),
        })
    }

    pub fn bind(&self, tape: &mut Tape) -> TransMixNodes {
        TransMixNodes {
            layers: self
                .layers
                .iter()
                .map(|l| TransMixLayerNodes {
                    state_w: tape.param(&l.state_w),
                    state_b: tape.param(&l.state_b),
                    q_w: tape.param(&l.q_w),
                    q_b: tape.param(&l.q_b),
                    w_alpha: tape.param(&l.w_alpha),
                    w_beta: tape.param(&l.w_beta),
                    res_w: tape.param(&l.res_w),
                })
                .collect(),
            hist_w: tape.param(&self.hist_w),
            hist_b: tape.param(&self.hist_b),
            skip_w: tape.param(&self.skip_w),
            skip_b: tape.param(&self.skip_b),
            head_w: tape.param(&self.head_w),
            head_b: tape.param(&self.head_b),
        }
    }

    /// One encoder layer over a batch.
    ///
    /// `state` is `[B, s]`, `q` is `[B, n]`, `values` is `[B, n, H, d_head]`.
    /// Returns the next value tokens (same shape) and the layer's state
    /// summary `[B, d_model]` (per-head global queries, concatenated).
    fn layer_graph(
        &self,
        tape: &mut Tape,
        nodes: &TransMixLayerNodes,
        state: NodeId,
        q: NodeId,
        values: NodeId,
    ) -> Result<(NodeId, NodeId)> {
        let b = tape.shape(state)[0];
        let (n, h, dm, ts) = (
            self.dims.n_agents,
            self.dims.heads,
            self.dims.d_model,
            self.dims.state_tokens,
        );
        let dh = self.dims.head_dim();
        let inv_sqrt = 1.0 / (dh as f64).sqrt();

        // Global query from the state tokens.
        let st = {
            let lin = tape.matmul(state, nodes.state_w)?;
            let lin = tape.add(lin, nodes.state_b)?;
            tape.reshape(lin, vec![b, ts, h, dh])?
        };
        let g = {
            let scored = tape.mul(st, nodes.w_alpha)?;
            let scores = tape.sum_axis(scored, 3, false)?; // [B, T_s, H]
            let scores = tape.scale(scores, inv_sqrt);
            let alpha = tape.softmax(scores, 1)?;
            let alpha = tape.reshape(alpha, vec![b, ts, h, 1])?;
            let weighted = tape.mul(st, alpha)?;
            tape.sum_axis(weighted, 1, false)? // [B, H, d_head]
        };
        let g4 = tape.reshape(g, vec![b, 1, h, dh])?;

        // Global key from query-modulated agent values.
        let k = {
            let q_col = tape.reshape(q, vec![b * n, 1])?;
            let lin = tape.matmul(q_col, nodes.q_w)?;
            let lin = tape.add(lin, nodes.q_b)?;
            tape.reshape(lin, vec![b, n, h, dh])?
        };
        let p = tape.mul(g4, k)?;
        let kg = {
            let scored = tape.mul(p, nodes.w_beta)?;
            let scores = tape.sum_axis(scored, 3, false)?; // [B, n, H]
            let scores = tape.scale(scores, inv_sqrt);
            let beta = tape.softmax(scores, 1)?;
            let beta = tape.reshape(beta, vec![b, n, h, 1])?;
            let weighted = tape.mul(p, beta)?;
            tape.sum_axis(weighted, 1, false)?
        };
        let kg4 = tape.reshape(kg, vec![b, 1, h, dh])?;

        // Modulate the value stream; linear transform plus residual.
        let u = tape.mul(kg4, values)?;
        let u2 = tape.reshape(u, vec![b * n, dm])?;
        let r = tape.matmul(u2, nodes.res_w)?;
        let v2 = tape.reshape(values, vec![b * n, dm])?;
        let r = tape.add(r, v2)?;
        let out = tape.reshape(r, vec![b, n, h, dh])?;

        let summary = tape.reshape(g, vec![b, dm])?;
        Ok((out, summary))
    }

    /// Full mixer: L layers, pooled streams, bottleneck skip, linear head.
    ///
    /// `q` is `[B, n]`, `histories` is `[B, n, d_h]`, `state` is `[B, s]`;
    /// result is `[B]`.
    pub fn forward_graph(
        &self,
        tape: &mut Tape,
        nodes: &TransMixNodes,
        q: NodeId,
        histories: NodeId,
        state: NodeId,
    ) -> Result<NodeId> {
        let b = tape.shape(q)[0];
        let (n, h, dm) = (self.dims.n_agents, self.dims.heads, self.dims.d_model);
        let dh = self.dims.head_dim();
        let d_hid = self.dims.agent_hidden;
        if tape.shape(q) != [b, n] {
            return Err(Error::shape(
                "transmix",
                format!("q expected [{b}x{n}], got {:?}", tape.shape(q)),
            ));
        }
        if tape.shape(histories) != [b, n, d_hid] {
            return Err(Error::shape(
                "transmix",
                format!(
                    "histories expected [{b}x{n}x{d_hid}], got {:?}",
                    tape.shape(histories)
                ),
            ));
        }

        // Layer-1 value tokens are the embedded histories.
        let mut values = {
            let h2 = tape.reshape(histories, vec![b * n, d_hid])?;
            let lin = tape.matmul(h2, nodes.hist_w)?;
            let lin = tape.add(lin, nodes.hist_b)?;
            tape.reshape(lin, vec![b, n, h, dh])?
        };
        let mut summary = None;
        for (layer, layer_nodes) in self.layers.iter().zip(&nodes.layers) {
            debug_assert_eq!(layer.res_w.shape(), &[dm, dm]);
            let (v, s) = self.layer_graph(tape, layer_nodes, state, q, values)?;
            values = v;
            summary = Some(s);
        }
        let summary = summary.expect("at least one layer");

        let v_mean = {
            let v3 = tape.reshape(values, vec![b, n, dm])?;
            tape.mean_axis(v3, 1, false)?
        };

        // Permutation-invariant skip: shared bottleneck, then mean over agents.
        let skip = {
            let q3 = tape.reshape(q, vec![b, n, 1])?;
            let cat = tape.concat(&[q3, histories], 2)?;
            let cat2 = tape.reshape(cat, vec![b * n, 1 + d_hid])?;
            let lin = tape.matmul(cat2, nodes.skip_w)?;
            let lin = tape.add(lin, nodes.skip_b)?;
            let lin3 = tape.reshape(lin, vec![b, n, self.dims.d_skip])?;
            tape.mean_axis(lin3, 1, false)?
        };

        let cat = tape.concat(&[v_mean, summary, skip], 1)?;
        let out = tape.matmul(cat, nodes.head_w)?;
        let out = tape.add(out, nodes.head_b)?;
        tape.reshape(out, vec![b])
    }
}

pub struct TransMixLayerNodes {
    pub state_w: NodeId,
    pub state_b: NodeId,
    pub q_w: NodeId,
    pub q_b: NodeId,
    pub w_alpha: NodeId,
    pub w_beta: NodeId,
    pub res_w: NodeId,
}

pub struct TransMixNodes {
    pub layers: Vec<TransMixLayerNodes>,
    pub hist_w: NodeId,
    pub hist_b: NodeId,
    pub skip_w: NodeId,
    pub skip_b: NodeId,
    pub head_w: NodeId,
    pub head_b: NodeId,
}

impl ParamSet for TransMixParams {
    fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            out.push((format!("mixer.layer{i}.state_w"), &l.state_w));
            out.push((format!("mixer.layer{i}.state_b"), &l.state_b));
            out.push((format!("mixer.layer{i}.q_w"), &l.q_w));
            out.push((format!("mixer.layer{i}.q_b"), &l.q_b));
            out.push((format!("mixer.layer{i}.w_alpha"), &l.w_alpha));
            out.push((format!("mixer.layer{i}.w_beta"), &l.w_beta));
            out.push((format!("mixer.layer{i}.res_w"), &l.res_w));
        }
        out.push(("mixer.hist_w".into(), &self.hist_w));
        out.push(("mixer.hist_b".into(), &self.hist_b));
        out.push(("mixer.skip_w".into(), &self.skip_w));
        out.push(("mixer.skip_b".into(), &self.skip_b));
        out.push(("mixer.head_w".into(), &self.head_w));
        out.push(("mixer.head_b".into(), &self.head_b));
        out
    }

    fn named_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out: Vec<(String, &mut Tensor)> = Vec::new();
        for (i, l) in self.layers.iter_mut().enumerate() {
            out.push((format!("mixer.layer{i}.state_w"), &mut l.state_w));
            out.push((format!("mixer.layer{i}.state_b"), &mut l.state_b));
            out.push((format!("mixer.layer{i}.q_w"), &mut l.q_w));
            out.push((format!("mixer.layer{i}.q_b"), &mut l.q_b));
            out.push((format!("mixer.layer{i}.w_alpha"), &mut l.w_alpha));
            out.push((format!("mixer.layer{i}.w_beta"), &mut l.w_beta));
            out.push((format!("mixer.layer{i}.res_w"), &mut l.res_w));
        }
        out.push(("mixer.hist_w".into(), &mut self.hist_w));
        out.push(("mixer.hist_b".into(), &mut self.hist_b));
        out.push(("mixer.skip_w".into(), &mut self.skip_w));
        out.push(("mixer.skip_b".into(), &mut self.skip_b));
        out.push(("mixer.head_w".into(), &mut self.head_w));
        out.push(("mixer.head_b".into(), &mut self.head_b));
        out
    }
}

/// Single-sample view of one encoder layer, matching the published
/// contract: value tokens in and out are `n` rows of `d_model`.
pub fn transmix_layer_values(
    params: &TransMixParams,
    layer_idx: usize,
    state: &[f64],
    q: &[f64],
    value_tokens: &[Vec<f64>],
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let dims = &params.dims;
    let (n, dm) = (dims.n_agents, dims.d_model);
    if q.len() != n || value_tokens.len() != n || value_tokens.iter().any(|v| v.len() != dm) {
        return Err(Error::shape(
            "transmix_layer",
            format!("expected {n} agents with {dm}-wide value tokens"),
        ));
    }
    let mut tape = Tape::new();
    let layer = &params.layers[layer_idx];
    let nodes = TransMixLayerNodes {
        state_w: tape.param(&layer.state_w),
        state_b: tape.param(&layer.state_b),
        q_w: tape.param(&layer.q_w),
        q_b: tape.param(&layer.q_b),
        w_alpha: tape.param(&layer.w_alpha),
        w_beta: tape.param(&layer.w_beta),
        res_w: tape.param(&layer.res_w),
    };
    let s = tape.constant(state.to_vec(), vec![1, state.len()])?;
    let qn = tape.constant(q.to_vec(), vec![1, n])?;
    let flat: Vec<f64> = value_tokens.iter().flatten().copied().collect();
    let v = tape.constant(flat, vec![1, n, dims.heads, dims.head_dim()])?;
    let (out, summary) = params.layer_graph(&mut tape, &nodes, s, qn, v)?;
    let out_rows = tape.value(out).chunks(dm).map(|c| c.to_vec()).collect();
    Ok((out_rows, tape.value(summary).to_vec()))
}

/// Additive attention over a token matrix: softmax(<w, x_t> / sqrt(d))
/// weights, convex combination of the tokens. `tokens` is `[T, d]`,
/// `w` is `[1, d]`; the pooled output is `[d]`.
pub fn additive_attention(tape: &mut Tape, tokens: NodeId, w: NodeId) -> Result<NodeId> {
    let shape = tape.shape(tokens).to_vec();
    if shape.len() != 2 || shape[0] == 0 {
        return Err(Error::shape(
            "additive_attention",
            format!("expected non-empty [T, d] tokens, got {:?}", shape),
        ));
    }
    let d = shape[1];
    let scored = tape.mul(tokens, w)?;
    let scores = tape.sum_axis(scored, 1, true)?; // [T, 1]
    let scores = tape.scale(scores, 1.0 / (d as f64).sqrt());
    let alpha = tape.softmax(scores, 0)?;
    let weighted = tape.mul(tokens, alpha)?;
    tape.sum_axis(weighted, 0, false)
}

/// Plain-value convenience wrapper around [`additive_attention`].
pub fn additive_attention_values(tokens: &[Vec<f64>], w: &[f64]) -> Result<Vec<f64>> {
    if tokens.is_empty() {
        return Err(Error::InvalidArgument(
            "additive attention needs at least one token".into(),
        ));
    }
    let d = w.len();
    let mut tape = Tape::new();
    let flat: Vec<f64> = tokens.iter().flatten().copied().collect();
    let t = tape.constant(flat, vec![tokens.len(), d])?;
    let wn = tape.constant(w.to_vec(), vec![1, d])?;
    let out = additive_attention(&mut tape, t, wn)?;
    Ok(tape.value(out).to_vec())
}
