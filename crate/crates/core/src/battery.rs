//! Gradient-check battery over every kernel, the recurrent agent, and the
//! three mixers.
//!
//! Each target runs `trials` randomized checks of analytic gradients
//! against central differences. Inputs are drawn from [-1, 1]; inputs to
//! kinked activations (ReLU, abs) are nudged at least 1e-3 away from zero
//! so the finite difference never straddles the kink.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::agent::{agent_forward_step, AgentDims, AgentNetParams};
use crate::mixers::{Mixer, QmixDims, QmixParams, TransMixDims, TransMixParams};
use crate::nn::ParamSet;
use crate::numerics::gradcheck::grad_check;
use crate::numerics::tape::Tape;
use crate::numerics::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct BatteryReport {
    pub name: String,
    pub trials: usize,
    pub max_rel_err: f64,
    pub pass: bool,
}

fn rand_vec(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Uniform in [-1, 1] but at least `margin` away from zero.
fn rand_vec_nudged(n: usize, margin: f64, rng: &mut impl Rng) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let v: f64 = rng.gen_range(-1.0..1.0);
            if v.abs() < margin {
                margin.copysign(if v == 0.0 { 1.0 } else { v })
            } else {
                v
            }
        })
        .collect()
}

fn param(data: Vec<f64>, shape: Vec<usize>) -> Tensor {
    Tensor::new(data, shape).unwrap().with_grad()
}

/// Checks d(sum(f(x) . c))/dx for a single-input kernel.
fn check_weighted<F>(params: &mut [Tensor], weights: Vec<f64>, h: f64, build: F) -> f64
where
    F: Fn(&mut Tape, &[crate::numerics::tape::NodeId]) -> crate::numerics::tape::NodeId,
{
    let mut f = |ps: &mut [Tensor], want_grad: bool| {
        let mut tape = Tape::new();
        let ids: Vec<_> = ps.iter().map(|t| tape.param(t)).collect();
        let out = build(&mut tape, &ids);
        let c = tape
            .constant(weights.clone(), tape.shape(out).to_vec())
            .unwrap();
        let weighted = tape.mul(out, c).unwrap();
        let loss = tape.sum_all(weighted);
        if want_grad {
            tape.backward(loss).unwrap();
            for (t, id) in ps.iter_mut().zip(&ids) {
                if let Some(g) = tape.grad(*id) {
                    let g = g.to_vec();
                    t.accumulate_grad(&g);
                }
            }
        }
        tape.value(loss)[0]
    };
    grad_check(&mut f, params, h, f64::INFINITY).max_rel_err
}

macro_rules! unary_target {
    ($name:ident, $method:ident, $nudged:expr) => {
        fn $name(rng: &mut ChaCha8Rng, h: f64) -> f64 {
            let data = if $nudged {
                rand_vec_nudged(6, 1e-3, rng)
            } else {
                rand_vec(6, rng)
            };
            let mut params = vec![param(data, vec![2, 3])];
            let weights = rand_vec(6, rng);
            check_weighted(&mut params, weights, h, |tape, ids| tape.$method(ids[0]))
        }
    };
}

unary_target!(target_relu, relu, true);
unary_target!(target_elu, elu, true);
unary_target!(target_abs, abs, true);
unary_target!(target_sigmoid, sigmoid, false);
unary_target!(target_tanh, tanh, false);

fn target_matmul(rng: &mut ChaCha8Rng, h: f64) -> f64 {
    let mut params = vec![
        param(rand_vec(6, rng), vec![2, 3]),
        param(rand_vec(6, rng), vec![3, 2]),
    ];
    let weights = rand_vec(4, rng);
    check_weighted(&mut params, weights, h, |tape, ids| {
        tape.matmul(ids[0], ids[1]).unwrap()
    })
}

fn target_ewise(rng: &mut ChaCha8Rng, h: f64, which: u8) -> f64 {
    // same-shape and broadcast variants alternate per trial
    let broadcast: bool = rng.gen();
    let b_shape = if broadcast { vec![1, 3] } else { vec![2, 3] };
    let b_len = if broadcast { 3 } else { 6 };
    let mut params = vec![
        param(rand_vec(6, rng), vec![2, 3]),
        param(rand_vec(b_len, rng), b_shape),
    ];
    let weights = rand_vec(6, rng);
    check_weighted(&mut params, weights, h, move |tape, ids| match which {
        0 => tape.add(ids[0], ids[1]).unwrap(),
        1 => tape.sub(ids[0], ids[1]).unwrap(),
        _ => tape.mul(ids[0], ids[1]).unwrap(),
    })
}

fn target_scale(rng: &mut ChaCha8Rng, h: f64) -> f64 {
    let c: f64 = rng.gen_range(-2.0..2.0);
    let mut params = vec![param(rand_vec(6, rng), vec![2, 3])];
    let weights = rand_vec(6, rng);
    check_weighted(&mut params, weights, h, move |tape, ids| {
        tape.scale(ids[0], c)
    })
}

fn target_softmax(rng: &mut ChaCha8Rng, h: f64) -> f64 {
    let axis = rng.gen_range(0..2);
    let mut params = vec![param(rand_vec(6, rng), vec![2, 3])];
    let weights = rand_vec(6, rng);
    check_weighted(&mut params, weights, h, move |tape, ids| {
        tape.softmax(ids[0], axis).unwrap()
    })
}

fn target_reduce(rng: &mut ChaCha8Rng, h: f64, mean: bool) -> f64 {
    let axis = rng.gen_range(0..2);
    let keepdim: bool = rng.gen();
    let mut params = vec![param(rand_vec(6, rng), vec![2, 3])];
    let out_len = if axis == 0 { 3 } else { 2 };
    let weights = rand_vec(out_len, rng);
    check_weighted(&mut params, weights, h, move |tape, ids| {
        if mean {
            tape.mean_axis(ids[0], axis, keepdim).unwrap()
        } else {
            tape.sum_axis(ids[0], axis, keepdim).unwrap()
        }
    })
}

fn target_sum_all(rng: &mut ChaCha8Rng, h: f64) -> f64 {
    let mut params = vec![param(rand_vec(6, rng), vec![2, 3])];
    let weights = vec![rng.gen_range(-1.0..1.0)];
    check_weighted(&mut params, weights, h, |tape, ids| tape.sum_all(ids[0]))
}

fn target_reshape(rng: &mut ChaCha8Rng, h: f64) -> f64 {
    let mut params = vec![param(rand_vec(6, rng), vec![2, 3])];
    let weights = rand_vec(6, rng);
    check_weighted(&mut params, weights, h, |tape, ids| {
        tape.reshape(ids[0], vec![3, 2]).unwrap()
    })
}

fn target_concat(rng: &mut ChaCha8Rng, h: f64) -> f64 {
    let axis = rng.gen_range(0..2);
    let mut params = vec![
        param(rand_vec(4, rng), vec![2, 2]),
        param(rand_vec(4, rng), vec![2, 2]),
    ];
    let weights = rand_vec(8, rng);
    check_weighted(&mut params, weights, h, move |tape, ids| {
        tape.concat(&[ids[0], ids[1]], axis).unwrap()
    })
}

fn target_gru(rng: &mut ChaCha8Rng, h: f64) -> f64 {
    let dims = AgentDims {
        obs_dim: 3,
        n_actions: 3,
        n_agents: 2,
        hidden: rng.gen_range(2..5),
    };
    let net = AgentNetParams::init(dims, rng);
    let x_row = rand_vec(dims.input_dim() * 2, rng);
    let h_row = rand_vec(dims.hidden * 2, rng);
    let mut params: Vec<Tensor> = net.named().into_iter().map(|(_, t)| t.clone()).collect();
    let weights: Vec<f64> = rand_vec(dims.n_actions * 2, rng)
        .into_iter()
        .map(|w| 0.02 * w)
        .collect();
    let hidden = dims.hidden;
    let input_dim = dims.input_dim();
    let mut f = move |ps: &mut [Tensor], want_grad: bool| {
        let mut tape = Tape::new();
        let ids: Vec<_> = ps.iter().map(|t| tape.param(t)).collect();
        let nodes = crate::agent::AgentNodes {
            w_in: ids[0],
            b_in: ids[1],
            w_z: ids[2],
            u_z: ids[3],
            b_z: ids[4],
            w_r: ids[5],
            u_r: ids[6],
            b_r: ids[7],
            w_c: ids[8],
            u_c: ids[9],
            b_c: ids[10],
            w_out: ids[11],
            b_out: ids[12],
        };
        let x = tape.constant(x_row.clone(), vec![2, input_dim]).unwrap();
        let h0 = tape.constant(h_row.clone(), vec![2, hidden]).unwrap();
        let (_, h1) = agent_forward_step(&mut tape, &nodes, x, h0).unwrap();
        let (q, _) = agent_forward_step(&mut tape, &nodes, x, h1).unwrap();
        let c = tape.constant(weights.clone(), vec![2, 3]).unwrap();
        let weighted = tape.mul(q, c).unwrap();
        let loss = tape.sum_all(weighted);
        if want_grad {
            tape.backward(loss).unwrap();
            for (t, id) in ps.iter_mut().zip(&ids) {
                if let Some(g) = tape.grad(*id) {
                    let g = g.to_vec();
                    t.accumulate_grad(&g);
                }
            }
        }
        tape.value(loss)[0]
    };
    grad_check(&mut f, &mut params, h, f64::INFINITY).max_rel_err
}

/// Checks a mixer's gradient with respect to every parameter and every
/// input (q, histories, state). The loss is a weighted sum of `Q_tot`
/// over a small batch of input points: a single point leaves too many
/// attention coordinates with fully cancelled (near-zero) gradients,
/// where the relative-error ratio measures only float noise.
fn check_mixer(mixer: &Mixer, n: usize, d_h: usize, s_dim: usize, rng: &mut ChaCha8Rng, h: f64) -> f64 {
    const POINTS: usize = 4;
    let mixer = mixer.clone();
    let mut params: Vec<Tensor> = mixer.named().into_iter().map(|(_, t)| t.clone()).collect();
    let n_mixer_params = params.len();
    params.push(param(rand_vec(POINTS * n, rng), vec![POINTS, n]));
    params.push(param(rand_vec(POINTS * n * d_h, rng), vec![POINTS, n, d_h]));
    params.push(param(rand_vec(POINTS * s_dim, rng), vec![POINTS, s_dim]));
    // Small weights keep |f| ~ 0.1: the float noise in the central
    // difference scales with |f| and must sit far below the 1e-8
    // denominator floor at exactly-zero-gradient coordinates.
    let weights: Vec<f64> = rand_vec_nudged(POINTS, 0.25, rng)
        .into_iter()
        .map(|w| 0.02 * w)
        .collect();

    let mut f = move |ps: &mut [Tensor], want_grad: bool| {
        // rebuild a mixer with the perturbed parameter values
        let mut m = mixer.clone();
        for ((_, dst), src) in m.named_mut().into_iter().zip(ps.iter()) {
            dst.data_mut().copy_from_slice(src.data());
        }
        let mut tape = Tape::new();
        let nodes = m.bind(&mut tape);
        let node_ids = nodes.flat();
        let q = tape.param(&ps[n_mixer_params]);
        let hist = tape.param(&ps[n_mixer_params + 1]);
        let st = tape.param(&ps[n_mixer_params + 2]);
        let out = m.forward_graph(&mut tape, &nodes, q, hist, st).unwrap();
        let c = tape.constant(weights.clone(), vec![POINTS]).unwrap();
        let weighted = tape.mul(out, c).unwrap();
        let loss = tape.sum_all(weighted);
        if want_grad {
            tape.backward(loss).unwrap();
            for (t, id) in ps.iter_mut().zip(node_ids.iter().chain([&q, &hist, &st])) {
                if let Some(g) = tape.grad(*id) {
                    let g = g.to_vec();
                    t.accumulate_grad(&g);
                }
            }
        }
        tape.value(loss)[0]
    };
    grad_check(&mut f, &mut params, h, f64::INFINITY).max_rel_err
}

fn target_vdn(rng: &mut ChaCha8Rng, h: f64) -> f64 {
    check_mixer(&Mixer::Vdn, 3, 2, 2, rng, h)
}

fn target_qmix(rng: &mut ChaCha8Rng, h: f64) -> f64 {
    let dims = QmixDims {
        n_agents: 3,
        s_dim: 3,
        embed: 3,
        hyper_hidden: 4,
    };
    let p = QmixParams::init(dims, rng);
    check_mixer(&Mixer::Qmix(p), 3, 2, 3, rng, h)
}

fn target_transmix(rng: &mut ChaCha8Rng, h: f64) -> f64 {
    let dims = TransMixDims {
        n_agents: 3,
        s_dim: 3,
        agent_hidden: 4,
        layers: 2,
        heads: 2,
        d_model: 8,
        state_tokens: 2,
        d_skip: 4,
    };
    let p = TransMixParams::init(dims, rng).unwrap();
    check_mixer(&Mixer::TransMix(p), 3, 4, 3, rng, h)
}

type Target = (&'static str, fn(&mut ChaCha8Rng, f64) -> f64);

const TARGETS: &[Target] = &[
    ("matmul", target_matmul),
    ("add", |rng, h| target_ewise(rng, h, 0)),
    ("sub", |rng, h| target_ewise(rng, h, 1)),
    ("mul", |rng, h| target_ewise(rng, h, 2)),
    ("scale", target_scale),
    ("relu", target_relu),
    ("elu", target_elu),
    ("sigmoid", target_sigmoid),
    ("tanh", target_tanh),
    ("abs", target_abs),
    ("softmax", target_softmax),
    ("sum_axis", |rng, h| target_reduce(rng, h, false)),
    ("mean_axis", |rng, h| target_reduce(rng, h, true)),
    ("sum_all", target_sum_all),
    ("reshape", target_reshape),
    ("concat", target_concat),
    ("gru_agent", target_gru),
    ("mixer_vdn", target_vdn),
    ("mixer_qmix", target_qmix),
    ("mixer_transmix", target_transmix),
];

/// Runs the whole battery. Every target gets its own deterministic
/// random stream derived from `seed`.
pub fn run_battery(trials: usize, h: f64, tol: f64, seed: u64) -> Vec<BatteryReport> {
    TARGETS
        .iter()
        .enumerate()
        .map(|(i, (name, target))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            let mut max_rel_err: f64 = 0.0;
            for _ in 0..trials {
                max_rel_err = max_rel_err.max(target(&mut rng, h));
            }
            BatteryReport {
                name: name.to_string(),
                trials,
                max_rel_err,
                pass: max_rel_err <= tol,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_passes_at_spec_tolerance() {
        // fewer trials than the acceptance run, same tolerance
        let reports = run_battery(10, 1e-5, 1e-4, 0);
        assert_eq!(reports.len(), TARGETS.len());
        for r in &reports {
            assert!(r.pass, "{} max rel err {}", r.name, r.max_rel_err);
        }
    }
}
