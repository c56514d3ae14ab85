//! Define-by-run reverse-mode automatic differentiation.
//!
//! A [`Tape`] records every operation of one forward pass as a node arena in
//! topological order. [`Tape::backward`] walks the arena once in reverse,
//! accumulating gradients into every node whose ancestry contains a
//! parameter leaf. Parameter leaves are bound with [`Tape::param`]; after
//! backward, their gradients are read with [`Tape::grad`] and accumulated
//! into the owning [`Tensor`] by the caller.
//!
//! The tape is rebuilt per forward pass, so unrolled recurrent episodes of
//! data-dependent length need no special casing.

use crate::error::{Error, Result};
use crate::numerics::tensor::{fmt_shape, numel, strides, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Matmul { a: NodeId, b: NodeId },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    Mul { a: NodeId, b: NodeId },
    Scale { a: NodeId, c: f64 },
    Relu { a: NodeId },
    Elu { a: NodeId },
    Sigmoid { a: NodeId },
    Tanh { a: NodeId },
    Abs { a: NodeId },
    Softmax { a: NodeId, axis: usize },
    Sum { a: NodeId, axis: usize },
    Mean { a: NodeId, axis: usize },
    SumAll { a: NodeId },
    Reshape { a: NodeId },
    Concat { inputs: Vec<NodeId>, axis: usize },
}

struct Node {
    shape: Vec<usize>,
    value: Vec<f64>,
    grad: Option<Vec<f64>>,
    op: Op,
    needs_grad: bool,
}

/// Records one forward pass and runs reverse-mode backpropagation over it.
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            consumed: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<f64>, op: Op, needs_grad: bool) -> NodeId {
        debug_assert_eq!(numel(&shape), value.len());
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            shape,
            value,
            grad: None,
            op,
            needs_grad,
        });
        id
    }

    /// Binds a parameter tensor as a leaf. Gradients flow to it iff the
    /// tensor `requires_grad`.
    pub fn param(&mut self, t: &Tensor) -> NodeId {
        self.push(
            t.shape().to_vec(),
            t.data().to_vec(),
            Op::Leaf,
            t.requires_grad(),
        )
    }

    /// A leaf that never receives gradient (inputs, targets, masks).
    pub fn constant(&mut self, data: Vec<f64>, shape: Vec<usize>) -> Result<NodeId> {
        if numel(&shape) != data.len() {
            return Err(Error::shape(
                "constant",
                format!(
                    "data length {} does not match shape {}",
                    data.len(),
                    fmt_shape(&shape)
                ),
            ));
        }
        Ok(self.push(shape, data, Op::Leaf, false))
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    /// Gradient of the last backward pass, if this node received one.
    pub fn grad(&self, id: NodeId) -> Option<&[f64]> {
        self.nodes[id.0].grad.as_deref()
    }

    // ---- elementwise binary ops ----

    fn binary(&mut self, name: &'static str, a: NodeId, b: NodeId) -> Result<Vec<usize>> {
        let sa = &self.nodes[a.0].shape;
        let sb = &self.nodes[b.0].shape;
        broadcast_shape(sa, sb).ok_or_else(|| {
            Error::shape(
                name,
                format!("{} is not broadcastable with {}", fmt_shape(sa), fmt_shape(sb)),
            )
        })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out_shape = self.binary("add", a, b)?;
        let value = ewise(
            &self.nodes[a.0].value,
            &self.nodes[a.0].shape,
            &self.nodes[b.0].value,
            &self.nodes[b.0].shape,
            &out_shape,
            |x, y| x + y,
        );
        let ng = self.nodes[a.0].needs_grad || self.nodes[b.0].needs_grad;
        Ok(self.push(out_shape, value, Op::Add { a, b }, ng))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out_shape = self.binary("sub", a, b)?;
        let value = ewise(
            &self.nodes[a.0].value,
            &self.nodes[a.0].shape,
            &self.nodes[b.0].value,
            &self.nodes[b.0].shape,
            &out_shape,
            |x, y| x - y,
        );
        let ng = self.nodes[a.0].needs_grad || self.nodes[b.0].needs_grad;
        Ok(self.push(out_shape, value, Op::Sub { a, b }, ng))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out_shape = self.binary("mul", a, b)?;
        let value = ewise(
            &self.nodes[a.0].value,
            &self.nodes[a.0].shape,
            &self.nodes[b.0].value,
            &self.nodes[b.0].shape,
            &out_shape,
            |x, y| x * y,
        );
        let ng = self.nodes[a.0].needs_grad || self.nodes[b.0].needs_grad;
        Ok(self.push(out_shape, value, Op::Mul { a, b }, ng))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let value: Vec<f64> = self.nodes[a.0].value.iter().map(|v| v * c).collect();
        let shape = self.nodes[a.0].shape.clone();
        let ng = self.nodes[a.0].needs_grad;
        self.push(shape, value, Op::Scale { a, c }, ng)
    }

    // ---- matmul ----

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let sa = &self.nodes[a.0].shape;
        let sb = &self.nodes[b.0].shape;
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::shape(
                "matmul",
                format!("{} x {}", fmt_shape(sa), fmt_shape(sb)),
            ));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut value = vec![0.0; m * n];
        matmul_acc(
            &self.nodes[a.0].value,
            &self.nodes[b.0].value,
            m,
            k,
            n,
            &mut value,
        );
        let ng = self.nodes[a.0].needs_grad || self.nodes[b.0].needs_grad;
        Ok(self.push(vec![m, n], value, Op::Matmul { a, b }, ng))
    }

    // ---- elementwise unary ops ----

    fn unary(&mut self, a: NodeId, op: Op, f: impl Fn(f64) -> f64) -> NodeId {
        let value: Vec<f64> = self.nodes[a.0].value.iter().map(|&v| f(v)).collect();
        let shape = self.nodes[a.0].shape.clone();
        let ng = self.nodes[a.0].needs_grad;
        self.push(shape, value, op, ng)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Relu { a }, |v| v.max(0.0))
    }

    /// ELU with alpha = 1.
    pub fn elu(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Elu { a }, |v| if v >= 0.0 { v } else { v.exp() - 1.0 })
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Sigmoid { a }, |v| 1.0 / (1.0 + (-v).exp()))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Tanh { a }, f64::tanh)
    }

    pub fn abs(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Abs { a }, f64::abs)
    }

    // ---- softmax ----

    pub fn softmax(&mut self, a: NodeId, axis: usize) -> Result<NodeId> {
        let shape = self.nodes[a.0].shape.clone();
        if axis >= shape.len() {
            return Err(Error::shape(
                "softmax",
                format!("axis {} out of range for {}", axis, fmt_shape(&shape)),
            ));
        }
        if shape[axis] == 0 {
            return Err(Error::shape(
                "softmax",
                format!("empty axis {} in {}", axis, fmt_shape(&shape)),
            ));
        }
        let (outer, ax, inner) = lanes(&shape, axis);
        let x = &self.nodes[a.0].value;
        let mut value = vec![0.0; x.len()];
        for o in 0..outer {
            for i in 0..inner {
                let base = o * ax * inner + i;
                let mut max = f64::NEG_INFINITY;
                for t in 0..ax {
                    max = max.max(x[base + t * inner]);
                }
                let mut z = 0.0;
                for t in 0..ax {
                    let e = (x[base + t * inner] - max).exp();
                    value[base + t * inner] = e;
                    z += e;
                }
                for t in 0..ax {
                    value[base + t * inner] /= z;
                }
            }
        }
        let ng = self.nodes[a.0].needs_grad;
        Ok(self.push(shape, value, Op::Softmax { a, axis }, ng))
    }

    // ---- reductions ----

    fn reduce(
        &mut self,
        name: &'static str,
        a: NodeId,
        axis: usize,
        keepdim: bool,
        mean: bool,
    ) -> Result<NodeId> {
        let shape = self.nodes[a.0].shape.clone();
        if axis >= shape.len() {
            return Err(Error::shape(
                name,
                format!("axis {} out of range for {}", axis, fmt_shape(&shape)),
            ));
        }
        if mean && shape[axis] == 0 {
            return Err(Error::shape(
                name,
                format!("empty axis {} in {}", axis, fmt_shape(&shape)),
            ));
        }
        let (outer, ax, inner) = lanes(&shape, axis);
        let x = &self.nodes[a.0].value;
        let mut value = vec![0.0; outer * inner];
        for o in 0..outer {
            for t in 0..ax {
                let src = &x[(o * ax + t) * inner..(o * ax + t + 1) * inner];
                let dst = &mut value[o * inner..(o + 1) * inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += s;
                }
            }
        }
        if mean {
            let inv = 1.0 / ax as f64;
            for v in &mut value {
                *v *= inv;
            }
        }
        let mut out_shape = shape.clone();
        if keepdim {
            out_shape[axis] = 1;
        } else {
            out_shape.remove(axis);
            if out_shape.is_empty() {
                out_shape.push(1);
            }
        }
        let ng = self.nodes[a.0].needs_grad;
        let op = if mean {
            Op::Mean { a, axis }
        } else {
            Op::Sum { a, axis }
        };
        Ok(self.push(out_shape, value, op, ng))
    }

    pub fn sum_axis(&mut self, a: NodeId, axis: usize, keepdim: bool) -> Result<NodeId> {
        self.reduce("sum", a, axis, keepdim, false)
    }

    pub fn mean_axis(&mut self, a: NodeId, axis: usize, keepdim: bool) -> Result<NodeId> {
        self.reduce("mean", a, axis, keepdim, true)
    }

    /// Full reduction to a scalar of shape `[1]`.
    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let s: f64 = self.nodes[a.0].value.iter().sum();
        let ng = self.nodes[a.0].needs_grad;
        self.push(vec![1], vec![s], Op::SumAll { a }, ng)
    }

    // ---- shape ops ----

    pub fn reshape(&mut self, a: NodeId, shape: Vec<usize>) -> Result<NodeId> {
        if numel(&shape) != self.nodes[a.0].value.len() {
            return Err(Error::shape(
                "reshape",
                format!(
                    "{} has {} elements, target {} has {}",
                    fmt_shape(&self.nodes[a.0].shape),
                    self.nodes[a.0].value.len(),
                    fmt_shape(&shape),
                    numel(&shape)
                ),
            ));
        }
        let value = self.nodes[a.0].value.clone();
        let ng = self.nodes[a.0].needs_grad;
        Ok(self.push(shape, value, Op::Reshape { a }, ng))
    }

    pub fn concat(&mut self, inputs: &[NodeId], axis: usize) -> Result<NodeId> {
        if inputs.is_empty() {
            return Err(Error::shape("concat", "no inputs".to_string()));
        }
        let first = self.nodes[inputs[0].0].shape.clone();
        if axis >= first.len() {
            return Err(Error::shape(
                "concat",
                format!("axis {} out of range for {}", axis, fmt_shape(&first)),
            ));
        }
        let mut axis_total = 0usize;
        for id in inputs {
            let s = &self.nodes[id.0].shape;
            if s.len() != first.len()
                || s.iter()
                    .zip(&first)
                    .enumerate()
                    .any(|(d, (x, y))| d != axis && x != y)
            {
                return Err(Error::shape(
                    "concat",
                    format!("{} incompatible with {}", fmt_shape(s), fmt_shape(&first)),
                ));
            }
            axis_total += s[axis];
        }
        let mut out_shape = first.clone();
        out_shape[axis] = axis_total;
        let inner: usize = first[axis + 1..].iter().product();
        let outer: usize = first[..axis].iter().product();
        let mut value = vec![0.0; numel(&out_shape)];
        let out_row = axis_total * inner;
        let mut offset = 0usize;
        for id in inputs {
            let s_axis = self.nodes[id.0].shape[axis];
            let chunk = s_axis * inner;
            let src = &self.nodes[id.0].value;
            for o in 0..outer {
                value[o * out_row + offset..o * out_row + offset + chunk]
                    .copy_from_slice(&src[o * chunk..(o + 1) * chunk]);
            }
            offset += chunk;
        }
        let ng = inputs.iter().any(|id| self.nodes[id.0].needs_grad);
        Ok(self.push(
            out_shape,
            value,
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
            ng,
        ))
    }

    // ---- backward ----

    /// Backpropagates from a scalar loss, writing gradients into every node
    /// on a parameter path. Gradients of separate backward-capable ops
    /// accumulate, matching explicit-zeroing semantics for parameters.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if self.consumed {
            return Err(Error::InvalidArgument(
                "backward called twice on the same tape; re-record the forward pass".into(),
            ));
        }
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::shape(
                "backward",
                format!(
                    "loss must be scalar, got {}",
                    fmt_shape(&self.nodes[loss.0].shape)
                ),
            ));
        }
        self.consumed = true;

        for node in &mut self.nodes {
            if node.needs_grad {
                node.grad = Some(vec![0.0; node.value.len()]);
            }
        }
        if let Some(g) = self.nodes[loss.0].grad.as_mut() {
            g[0] = 1.0;
        } else {
            // Loss has no parameter ancestry: all gradients are zero.
            return Ok(());
        }

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].needs_grad {
                continue;
            }
            let op = self.nodes[i].op.clone();
            let g = match self.nodes[i].grad.take() {
                Some(g) => g,
                None => continue,
            };
            match op {
                Op::Leaf => {}
                Op::Matmul { a, b } => {
                    let (m, k) = {
                        let s = &self.nodes[a.0].shape;
                        (s[0], s[1])
                    };
                    let n = self.nodes[b.0].shape[1];
                    if self.nodes[a.0].needs_grad {
                        let mut da = vec![0.0; m * k];
                        matmul_nt_acc(&g, &self.nodes[b.0].value, m, n, k, &mut da);
                        self.accum(a, &da);
                    }
                    if self.nodes[b.0].needs_grad {
                        let mut db = vec![0.0; k * n];
                        matmul_tn_acc(&self.nodes[a.0].value, &g, m, k, n, &mut db);
                        self.accum(b, &db);
                    }
                }
                Op::Add { a, b } => {
                    let out_shape = self.nodes[i].shape.clone();
                    if self.nodes[a.0].needs_grad {
                        let da = reduce_to_shape(&g, &out_shape, &self.nodes[a.0].shape);
                        self.accum(a, &da);
                    }
                    if self.nodes[b.0].needs_grad {
                        let db = reduce_to_shape(&g, &out_shape, &self.nodes[b.0].shape);
                        self.accum(b, &db);
                    }
                }
                Op::Sub { a, b } => {
                    let out_shape = self.nodes[i].shape.clone();
                    if self.nodes[a.0].needs_grad {
                        let da = reduce_to_shape(&g, &out_shape, &self.nodes[a.0].shape);
                        self.accum(a, &da);
                    }
                    if self.nodes[b.0].needs_grad {
                        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
                        let db = reduce_to_shape(&neg, &out_shape, &self.nodes[b.0].shape);
                        self.accum(b, &db);
                    }
                }
                Op::Mul { a, b } => {
                    let out_shape = self.nodes[i].shape.clone();
                    if self.nodes[a.0].needs_grad {
                        let gb = ewise(
                            &g,
                            &out_shape,
                            &self.nodes[b.0].value,
                            &self.nodes[b.0].shape,
                            &out_shape,
                            |x, y| x * y,
                        );
                        let da = reduce_to_shape(&gb, &out_shape, &self.nodes[a.0].shape);
                        self.accum(a, &da);
                    }
                    if self.nodes[b.0].needs_grad {
                        let ga = ewise(
                            &g,
                            &out_shape,
                            &self.nodes[a.0].value,
                            &self.nodes[a.0].shape,
                            &out_shape,
                            |x, y| x * y,
                        );
                        let db = reduce_to_shape(&ga, &out_shape, &self.nodes[b.0].shape);
                        self.accum(b, &db);
                    }
                }
                Op::Scale { a, c } => {
                    let da: Vec<f64> = g.iter().map(|v| v * c).collect();
                    self.accum(a, &da);
                }
                Op::Relu { a } => {
                    let da: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[a.0].value)
                        .map(|(gv, &x)| if x > 0.0 { *gv } else { 0.0 })
                        .collect();
                    self.accum(a, &da);
                }
                Op::Elu { a } => {
                    let da: Vec<f64> = g
                        .iter()
                        .zip(self.nodes[a.0].value.iter().zip(&self.nodes[i].value))
                        .map(|(gv, (&x, &y))| if x >= 0.0 { *gv } else { gv * (y + 1.0) })
                        .collect();
                    self.accum(a, &da);
                }
                Op::Sigmoid { a } => {
                    let da: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[i].value)
                        .map(|(gv, &s)| gv * s * (1.0 - s))
                        .collect();
                    self.accum(a, &da);
                }
                Op::Tanh { a } => {
                    let da: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[i].value)
                        .map(|(gv, &t)| gv * (1.0 - t * t))
                        .collect();
                    self.accum(a, &da);
                }
                Op::Abs { a } => {
                    let da: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[a.0].value)
                        .map(|(gv, &x)| gv * sign(x))
                        .collect();
                    self.accum(a, &da);
                }
                Op::Softmax { a, axis } => {
                    let shape = self.nodes[i].shape.clone();
                    let (outer, ax, inner) = lanes(&shape, axis);
                    let s = &self.nodes[i].value;
                    let mut da = vec![0.0; s.len()];
                    for o in 0..outer {
                        for ii in 0..inner {
                            let base = o * ax * inner + ii;
                            let mut dot = 0.0;
                            for t in 0..ax {
                                let idx = base + t * inner;
                                dot += g[idx] * s[idx];
                            }
                            for t in 0..ax {
                                let idx = base + t * inner;
                                da[idx] = s[idx] * (g[idx] - dot);
                            }
                        }
                    }
                    self.accum(a, &da);
                }
                Op::Sum { a, axis } => {
                    let in_shape = self.nodes[a.0].shape.clone();
                    let (outer, ax, inner) = lanes(&in_shape, axis);
                    let mut da = vec![0.0; numel(&in_shape)];
                    for o in 0..outer {
                        let src = &g[o * inner..(o + 1) * inner];
                        for t in 0..ax {
                            da[(o * ax + t) * inner..(o * ax + t + 1) * inner]
                                .copy_from_slice(src);
                        }
                    }
                    self.accum(a, &da);
                }
                Op::Mean { a, axis } => {
                    let in_shape = self.nodes[a.0].shape.clone();
                    let (outer, ax, inner) = lanes(&in_shape, axis);
                    let inv = 1.0 / ax as f64;
                    let mut da = vec![0.0; numel(&in_shape)];
                    for o in 0..outer {
                        for t in 0..ax {
                            let dst =
                                &mut da[(o * ax + t) * inner..(o * ax + t + 1) * inner];
                            for (d, s) in dst.iter_mut().zip(&g[o * inner..(o + 1) * inner]) {
                                *d = s * inv;
                            }
                        }
                    }
                    self.accum(a, &da);
                }
                Op::SumAll { a } => {
                    let da = vec![g[0]; self.nodes[a.0].value.len()];
                    self.accum(a, &da);
                }
                Op::Reshape { a } => {
                    self.accum(a, &g);
                }
                Op::Concat { inputs, axis } => {
                    let out_shape = self.nodes[i].shape.clone();
                    let inner: usize = out_shape[axis + 1..].iter().product();
                    let outer: usize = out_shape[..axis].iter().product();
                    let out_row = out_shape[axis] * inner;
                    let mut offset = 0usize;
                    for id in inputs {
                        let s_axis = self.nodes[id.0].shape[axis];
                        let chunk = s_axis * inner;
                        if self.nodes[id.0].needs_grad {
                            let mut da = vec![0.0; self.nodes[id.0].value.len()];
                            for o in 0..outer {
                                da[o * chunk..(o + 1) * chunk].copy_from_slice(
                                    &g[o * out_row + offset..o * out_row + offset + chunk],
                                );
                            }
                            self.accum(id, &da);
                        }
                        offset += chunk;
                    }
                }
            }
            // Interior gradients are restored for inspection; leaves keep theirs.
            self.nodes[i].grad = Some(g);
        }
        Ok(())
    }

    fn accum(&mut self, id: NodeId, g: &[f64]) {
        if !self.nodes[id.0].needs_grad {
            return;
        }
        if let Some(dst) = self.nodes[id.0].grad.as_mut() {
            for (d, s) in dst.iter_mut().zip(g) {
                *d += s;
            }
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// (outer, axis extent, inner) decomposition for reductions along `axis`.
fn lanes(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

/// Output shape of an elementwise op, with per-axis extent-1 broadcasting.
/// Ranks must match; each axis pair must be equal or contain a 1.
fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    if a.len() != b.len() {
        return None;
    }
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            if x == y {
                Some(x)
            } else if x == 1 {
                Some(y)
            } else if y == 1 {
                Some(x)
            } else {
                None
            }
        })
        .collect()
}

/// Elementwise combine with extent-1 broadcasting.
fn ewise(
    a: &[f64],
    sa: &[usize],
    b: &[f64],
    sb: &[usize],
    out_shape: &[usize],
    f: impl Fn(f64, f64) -> f64,
) -> Vec<f64> {
    if sa == sb {
        return a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect();
    }
    let n = numel(out_shape);
    let mut out = Vec::with_capacity(n);
    let stride_a = bcast_strides(sa, out_shape);
    let stride_b = bcast_strides(sb, out_shape);
    let rank = out_shape.len();
    let mut idx = vec![0usize; rank];
    let mut off_a = 0usize;
    let mut off_b = 0usize;
    for _ in 0..n {
        out.push(f(a[off_a], b[off_b]));
        for d in (0..rank).rev() {
            idx[d] += 1;
            off_a += stride_a[d];
            off_b += stride_b[d];
            if idx[d] < out_shape[d] {
                break;
            }
            off_a -= stride_a[d] * idx[d];
            off_b -= stride_b[d] * idx[d];
            idx[d] = 0;
        }
    }
    out
}

/// Strides for reading `shape` as if broadcast to `out_shape`
/// (zero stride on broadcast axes).
fn bcast_strides(shape: &[usize], out_shape: &[usize]) -> Vec<usize> {
    let real = strides(shape);
    shape
        .iter()
        .zip(out_shape)
        .zip(real)
        .map(|((&s, &o), r)| if s == o { r } else { 0 })
        .collect()
}

/// Sums a gradient over the axes that were broadcast in the forward op.
fn reduce_to_shape(g: &[f64], g_shape: &[usize], target: &[usize]) -> Vec<f64> {
    if g_shape == target {
        return g.to_vec();
    }
    let mut out = vec![0.0; numel(target)];
    let stride_t = bcast_strides(target, g_shape);
    let rank = g_shape.len();
    let mut idx = vec![0usize; rank];
    let mut off = 0usize;
    for &gv in g {
        out[off] += gv;
        for d in (0..rank).rev() {
            idx[d] += 1;
            off += stride_t[d];
            if idx[d] < g_shape[d] {
                break;
            }
            off -= stride_t[d] * idx[d];
            idx[d] = 0;
        }
    }
    out
}

/// C += A[m,k] * B[k,n]
fn matmul_acc(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, c: &mut [f64]) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let crow = &mut c[i * n..(i + 1) * n];
        for (p, &aip) in arow.iter().enumerate() {
            let brow = &b[p * n..(p + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += aip * bv;
            }
        }
    }
}

/// C += A[m,n] * B[k,n]^T  (i.e. C[i,p] += dot(A row i, B row p))
fn matmul_nt_acc(a: &[f64], b: &[f64], m: usize, n: usize, k: usize, c: &mut [f64]) {
    for i in 0..m {
        let arow = &a[i * n..(i + 1) * n];
        let crow = &mut c[i * k..(i + 1) * k];
        for (p, cv) in crow.iter_mut().enumerate() {
            let brow = &b[p * n..(p + 1) * n];
            let mut s = 0.0;
            for (&x, &y) in arow.iter().zip(brow) {
                s += x * y;
            }
            *cv += s;
        }
    }
}

/// C += A[m,k]^T * B[m,n]  (i.e. C[p,j] += sum_i A[i,p] * B[i,j])
fn matmul_tn_acc(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, c: &mut [f64]) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let brow = &b[i * n..(i + 1) * n];
        for (p, &aip) in arow.iter().enumerate() {
            let crow = &mut c[p * n..(p + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += aip * bv;
            }
        }
    }
}
