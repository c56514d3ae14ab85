//! Value decomposition network: `Q_tot` is the sum of the agent values.

use crate::error::{Error, Result};
use crate::numerics::tape::{NodeId, Tape};

/// Sums `q` of shape `[B, n]` over the agent axis, yielding `[B]`.
pub fn vdn_graph(tape: &mut Tape, q: NodeId) -> Result<NodeId> {
    if tape.shape(q).len() != 2 || tape.shape(q)[1] == 0 {
        return Err(Error::shape(
            "vdn",
            format!("expected non-empty [B, n], got {:?}", tape.shape(q)),
        ));
    }
    tape.sum_axis(q, 1, false)
}

/// Plain-value convenience: `Q_tot = sum_i q_i`.
pub fn vdn_forward(q: &[f64]) -> Result<f64> {
    if q.is_empty() {
        return Err(Error::InvalidArgument("vdn needs at least one agent".into()));
    }
    Ok(q.iter().sum())
}
