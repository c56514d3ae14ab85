//! QMIX: monotonic mixing with state-conditioned hypernetworks.
//!
//! Hypernetworks read the global state and emit the mixing weights; the
//! weights pass through an absolute value, which is what guarantees
//! `dQ_tot/dq_i >= 0`. The scalar state bias comes from a two-layer net
//! with ReLU.

use rand::Rng;

use crate::error::Result;
use crate::nn::{glorot, zero_bias, ParamSet};
use crate::numerics::tape::{NodeId, Tape};
use crate::numerics::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QmixDims {
    pub n_agents: usize,
    pub s_dim: usize,
    /// Mixing embed width (m).
    pub embed: usize,
    /// Hidden width of the state-bias net.
    pub hyper_hidden: usize,
}

#[derive(Debug, Clone)]
pub struct QmixParams {
    pub dims: QmixDims,
    pub hyper_w1_w: Tensor,
    pub hyper_w1_b: Tensor,
    pub hyper_b1_w: Tensor,
    pub hyper_b1_b: Tensor,
    pub hyper_w2_w: Tensor,
    pub hyper_w2_b: Tensor,
    pub v_w1: Tensor,
    pub v_b1: Tensor,
    pub v_w2: Tensor,
    pub v_b2: Tensor,
}

impl QmixParams {
    pub fn init(dims: QmixDims, rng: &mut impl Rng) -> Self {
        QmixParams {
            dims,
            hyper_w1_w: glorot(dims.s_dim, dims.n_agents * dims.embed, rng),
            hyper_w1_b: zero_bias(dims.n_agents * dims.embed),
            hyper_b1_w: glorot(dims.s_dim, dims.embed, rng),
            hyper_b1_b: zero_bias(dims.embed),
            hyper_w2_w: glorot(dims.s_dim, dims.embed, rng),
            hyper_w2_b: zero_bias(dims.embed),
            v_w1: glorot(dims.s_dim, dims.hyper_hidden, rng),
            v_b1: zero_bias(dims.hyper_hidden),
            v_w2: glorot(dims.hyper_hidden, 1, rng),
            v_b2: zero_bias(1),
        }
    }

    pub fn zeros(dims: QmixDims) -> Self {
        QmixParams {
            dims,
            hyper_w1_w: Tensor::zeros(&[dims.s_dim, dims.n_agents * dims.embed]).with_grad(),
            hyper_w1_b: zero_bias(dims.n_agents * dims.embed),
            hyper_b1_w: Tensor::zeros(&[dims.s_dim, dims.embed]).with_grad(),
            hyper_b1_b: zero_bias(dims.embed),
            hyper_w2_w: Tensor::zeros(&[dims.s_dim, dims.embed]).with_grad(),
            hyper_w2_b: zero_bias(dims.embed),
            v_w1: Tensor::zeros(&[dims.s_dim, dims.hyper_hidden]).with_grad(),
            v_b1: zero_bias(dims.hyper_hidden),
            v_w2: Tensor::zeros(&[dims.hyper_hidden, 1]).with_grad(),
            v_b2: zero_bias(1),
        }
    }

    pub fn bind(&self, tape: &mut Tape) -> QmixNodes {
        QmixNodes {
            hyper_w1_w: tape.param(&self.hyper_w1_w),
            hyper_w1_b: tape.param(&self.hyper_w1_b),
            hyper_b1_w: tape.param(&self.hyper_b1_w),
            hyper_b1_b: tape.param(&self.hyper_b1_b),
            hyper_w2_w: tape.param(&self.hyper_w2_w),
            hyper_w2_b: tape.param(&self.hyper_w2_b),
            v_w1: tape.param(&self.v_w1),
            v_b1: tape.param(&self.v_b1),
            v_w2: tape.param(&self.v_w2),
            v_b2: tape.param(&self.v_b2),
        }
    }

    /// Q_tot = |W2(s)|^T ELU(|W1(s)|^T q + b1(s)) + v(s), batched.
    ///
    /// `q` is `[B, n]`, `state` is `[B, s]`; result is `[B]`.
    pub fn forward_graph(
        &self,
        tape: &mut Tape,
        nodes: &QmixNodes,
        q: NodeId,
        state: NodeId,
    ) -> Result<NodeId> {
        let b = tape.shape(q)[0];
        let (n, m) = (self.dims.n_agents, self.dims.embed);

        let w1_flat = {
            let lin = tape.matmul(state, nodes.hyper_w1_w)?;
            let lin = tape.add(lin, nodes.hyper_w1_b)?;
            tape.abs(lin)
        };
        let w1 = tape.reshape(w1_flat, vec![b, n, m])?;
        let b1 = {
            let lin = tape.matmul(state, nodes.hyper_b1_w)?;
            tape.add(lin, nodes.hyper_b1_b)?
        };
        let q_col = tape.reshape(q, vec![b, n, 1])?;
        let qw = tape.mul(q_col, w1)?;
        let mixed = tape.sum_axis(qw, 1, false)?; // [B, m]
        let pre = tape.add(mixed, b1)?;
        let hidden = tape.elu(pre);

        let w2 = {
            let lin = tape.matmul(state, nodes.hyper_w2_w)?;
            let lin = tape.add(lin, nodes.hyper_w2_b)?;
            tape.abs(lin)
        };
        let hw = tape.mul(hidden, w2)?;
        let y = tape.sum_axis(hw, 1, false)?; // [B]

        let v = {
            let l1 = tape.matmul(state, nodes.v_w1)?;
            let l1 = tape.add(l1, nodes.v_b1)?;
            let h1 = tape.relu(l1);
            let l2 = tape.matmul(h1, nodes.v_w2)?;
            let l2 = tape.add(l2, nodes.v_b2)?;
            tape.reshape(l2, vec![b])?
        };
        tape.add(y, v)
    }
}

pub struct QmixNodes {
    pub hyper_w1_w: NodeId,
    pub hyper_w1_b: NodeId,
    pub hyper_b1_w: NodeId,
    pub hyper_b1_b: NodeId,
    pub hyper_w2_w: NodeId,
    pub hyper_w2_b: NodeId,
    pub v_w1: NodeId,
    pub v_b1: NodeId,
    pub v_w2: NodeId,
    pub v_b2: NodeId,
}

impl ParamSet for QmixParams {
    fn named(&self) -> Vec<(String, &Tensor)> {
        vec![
            ("mixer.hyper_w1_w".into(), &self.hyper_w1_w),
            ("mixer.hyper_w1_b".into(), &self.hyper_w1_b),
            ("mixer.hyper_b1_w".into(), &self.hyper_b1_w),
            ("mixer.hyper_b1_b".into(), &self.hyper_b1_b),
            ("mixer.hyper_w2_w".into(), &self.hyper_w2_w),
            ("mixer.hyper_w2_b".into(), &self.hyper_w2_b),
            ("mixer.v_w1".into(), &self.v_w1),
            ("mixer.v_b1".into(), &self.v_b1),
            ("mixer.v_w2".into(), &self.v_w2),
            ("mixer.v_b2".into(), &self.v_b2),
        ]
    }

    fn named_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        vec![
            ("mixer.hyper_w1_w".into(), &mut self.hyper_w1_w),
            ("mixer.hyper_w1_b".into(), &mut self.hyper_w1_b),
            ("mixer.hyper_b1_w".into(), &mut self.hyper_b1_w),
            ("mixer.hyper_b1_b".into(), &mut self.hyper_b1_b),
            ("mixer.hyper_w2_w".into(), &mut self.hyper_w2_w),
            ("mixer.hyper_w2_b".into(), &mut self.hyper_w2_b),
            ("mixer.v_w1".into(), &mut self.v_w1),
            ("mixer.v_b1".into(), &mut self.v_b1),
            ("mixer.v_w2".into(), &mut self.v_w2),
            ("mixer.v_b2".into(), &mut self.v_b2),
        ]
    }
}
