//! Straight-line reference evaluations of the mixing networks.
//!
//! Everything here is written as plain nested loops over `f64` slices,
//! deliberately independent of the tape/graph machinery it is used to
//! check. Parameter values are read from the real parameter structs; the
//! computation path is the thing being cross-validated.

#![allow(dead_code)]

use transmix_core::mixers::{QmixParams, TransMixParams};

/// softmax(<w, t_i> / sqrt(d)) convex combination of the tokens.
pub fn ref_additive_attention(tokens: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    let d = w.len();
    let scale = 1.0 / (d as f64).sqrt();
    let scores: Vec<f64> = tokens
        .iter()
        .map(|t| t.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() * scale)
        .collect();
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    let mut out = vec![0.0; d];
    for (token, e) in tokens.iter().zip(&exps) {
        for (o, t) in out.iter_mut().zip(token) {
            *o += (e / z) * t;
        }
    }
    out
}

/// x[1, in] * w[in, out] + b[out]
fn linear(x: &[f64], w: &[f64], b: &[f64], out_dim: usize) -> Vec<f64> {
    let mut out = b.to_vec();
    for (i, xv) in x.iter().enumerate() {
        for j in 0..out_dim {
            out[j] += xv * w[i * out_dim + j];
        }
    }
    out
}

/// One encoder layer evaluated head by head.
///
/// Returns (out_tokens `n x d_model`, state_summary `d_model`).
pub fn ref_transmix_layer(
    params: &TransMixParams,
    layer_idx: usize,
    state: &[f64],
    q: &[f64],
    values: &[Vec<f64>],
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let dims = &params.dims;
    let (n, heads, dm, ts) = (dims.n_agents, dims.heads, dims.d_model, dims.state_tokens);
    let dh = dm / heads;
    let layer = &params.layers[layer_idx];

    let st_flat = linear(state, layer.state_w.data(), layer.state_b.data(), ts * dm);
    let k_rows: Vec<Vec<f64>> = q
        .iter()
        .map(|&qi| linear(&[qi], layer.q_w.data(), layer.q_b.data(), dm))
        .collect();

    let mut g_full = vec![0.0; dm];
    let mut u_rows = vec![vec![0.0; dm]; n];
    for h in 0..heads {
        let head_slice = |row: &[f64]| row[h * dh..(h + 1) * dh].to_vec();
        let w_alpha = &layer.w_alpha.data()[h * dh..(h + 1) * dh];
        let w_beta = &layer.w_beta.data()[h * dh..(h + 1) * dh];

        // global query from the state tokens of this head
        let state_tokens: Vec<Vec<f64>> = (0..ts)
            .map(|t| st_flat[t * dm + h * dh..t * dm + (h + 1) * dh].to_vec())
            .collect();
        let g = ref_additive_attention(&state_tokens, w_alpha);
        g_full[h * dh..(h + 1) * dh].copy_from_slice(&g);

        // global key from query-modulated agent tokens
        let p: Vec<Vec<f64>> = k_rows
            .iter()
            .map(|k| {
                head_slice(k)
                    .iter()
                    .zip(&g)
                    .map(|(kv, gv)| kv * gv)
                    .collect()
            })
            .collect();
        let kg = ref_additive_attention(&p, w_beta);

        for (i, v) in values.iter().enumerate() {
            let vh = head_slice(v);
            for (c, (kgv, vv)) in kg.iter().zip(&vh).enumerate() {
                u_rows[i][h * dh + c] = kgv * vv;
            }
        }
    }

    let out: Vec<Vec<f64>> = u_rows
        .iter()
        .zip(values)
        .map(|(u, v)| {
            let mut r = v.clone();
            for j in 0..dm {
                for (k, uv) in u.iter().enumerate() {
                    r[j] += uv * params.layers[layer_idx].res_w.data()[k * dm + j];
                }
            }
            r
        })
        .collect();
    (out, g_full)
}

/// Full mixer: embedded histories through L layers, mean-pooled streams,
/// bottlenecked skip, linear head.
pub fn ref_transmix_forward(
    params: &TransMixParams,
    state: &[f64],
    q: &[f64],
    histories: &[Vec<f64>],
) -> f64 {
    let dims = &params.dims;
    let (n, dm) = (dims.n_agents, dims.d_model);

    let mut values: Vec<Vec<f64>> = histories
        .iter()
        .map(|h| linear(h, params.hist_w.data(), params.hist_b.data(), dm))
        .collect();
    let mut summary = vec![0.0; dm];
    for l in 0..dims.layers {
        let (v, s) = ref_transmix_layer(params, l, state, q, &values);
        values = v;
        summary = s;
    }

    let mut v_mean = vec![0.0; dm];
    for v in &values {
        for (m, x) in v_mean.iter_mut().zip(v) {
            *m += x / n as f64;
        }
    }

    let mut skip_mean = vec![0.0; dims.d_skip];
    for (qi, h) in q.iter().zip(histories) {
        let mut row = vec![*qi];
        row.extend_from_slice(h);
        let s = linear(&row, params.skip_w.data(), params.skip_b.data(), dims.d_skip);
        for (m, x) in skip_mean.iter_mut().zip(&s) {
            *m += x / n as f64;
        }
    }

    let mut cat = v_mean;
    cat.extend_from_slice(&summary);
    cat.extend_from_slice(&skip_mean);
    linear(&cat, params.head_w.data(), params.head_b.data(), 1)[0]
}

/// Q_tot = |W2(s)|^T ELU(|W1(s)|^T q + b1(s)) + v(s)
pub fn ref_qmix_forward(params: &QmixParams, state: &[f64], q: &[f64]) -> f64 {
    let dims = &params.dims;
    let (n, m) = (dims.n_agents, dims.embed);
    let elu = |x: f64| if x >= 0.0 { x } else { x.exp() - 1.0 };

    let w1: Vec<f64> = linear(state, params.hyper_w1_w.data(), params.hyper_w1_b.data(), n * m)
        .into_iter()
        .map(f64::abs)
        .collect();
    let b1 = linear(state, params.hyper_b1_w.data(), params.hyper_b1_b.data(), m);
    let mut hidden = b1;
    for i in 0..n {
        for j in 0..m {
            hidden[j] += q[i] * w1[i * m + j];
        }
    }
    for h in hidden.iter_mut() {
        *h = elu(*h);
    }
    let w2: Vec<f64> = linear(state, params.hyper_w2_w.data(), params.hyper_w2_b.data(), m)
        .into_iter()
        .map(f64::abs)
        .collect();
    let mut y: f64 = hidden.iter().zip(&w2).map(|(h, w)| h * w).sum();

    let v1: Vec<f64> = linear(state, params.v_w1.data(), params.v_b1.data(), dims.hyper_hidden)
        .into_iter()
        .map(|x| x.max(0.0))
        .collect();
    y += linear(&v1, params.v_w2.data(), params.v_b2.data(), 1)[0];
    y
}
