//! Find worst coordinates for qmix and transmix battery targets.
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use transmix_core::mixers::{Mixer, QmixDims, QmixParams, TransMixDims, TransMixParams};
use transmix_core::nn::ParamSet;
use transmix_core::numerics::gradcheck::grad_check;
use transmix_core::numerics::tape::Tape;
use transmix_core::numerics::tensor::Tensor;

const POINTS: usize = 4;

fn rand_vec(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn check(mixer: &Mixer, n: usize, d_h: usize, s_dim: usize, rng: &mut ChaCha8Rng) -> (f64, usize, usize, f64, f64) {
    let mixer = mixer.clone();
    let mut params: Vec<Tensor> = mixer.named().into_iter().map(|(_, t)| t.clone()).collect();
    let np = params.len();
    params.push(Tensor::new(rand_vec(POINTS * n, rng), vec![POINTS, n]).unwrap().with_grad());
    params.push(Tensor::new(rand_vec(POINTS * n * d_h, rng), vec![POINTS, n, d_h]).unwrap().with_grad());
    params.push(Tensor::new(rand_vec(POINTS * s_dim, rng), vec![POINTS, s_dim]).unwrap().with_grad());
    let weights: Vec<f64> = (0..POINTS).map(|_| {
        let v: f64 = rng.gen_range(-1.0..1.0);
        if v.abs() < 0.25 { 0.25f64.copysign(if v == 0.0 {1.0} else {v}) } else { v }
    }).collect();
    let mixer2 = mixer.clone();
    let weights2 = weights.clone();
    let mut f = move |ps: &mut [Tensor], want_grad: bool| {
        let mut m = mixer2.clone();
        for ((_, dst), src) in m.named_mut().into_iter().zip(ps.iter()) {
            dst.data_mut().copy_from_slice(src.data());
        }
        let mut tape = Tape::new();
        let nodes = m.bind(&mut tape);
        let ids = nodes.flat();
        let q = tape.param(&ps[np]);
        let h = tape.param(&ps[np + 1]);
        let s = tape.param(&ps[np + 2]);
        let out = m.forward_graph(&mut tape, &nodes, q, h, s).unwrap();
        let c = tape.constant(weights2.clone(), vec![POINTS]).unwrap();
        let w = tape.mul(out, c).unwrap();
        let loss = tape.sum_all(w);
        if want_grad {
            tape.backward(loss).unwrap();
            for (t, id) in ps.iter_mut().zip(ids.iter().chain([&q, &h, &s])) {
                if let Some(g) = tape.grad(*id) { let g = g.to_vec(); t.accumulate_grad(&g); }
            }
        }
        tape.value(loss)[0]
    };
    let rep = grad_check(&mut f, &mut params, 1e-5, 1e-4);
    // recover analytic & numeric at the worst coordinate for reporting
    let (pi, ci) = rep.worst;
    let a_store: Vec<Vec<f64>> = {
        for p in params.iter_mut() { p.zero_grad(); }
        let _ = f(&mut params, true);
        params.iter().map(|p| p.grad().map(|g| g.to_vec()).unwrap_or_default()).collect()
    };
    let orig = params[pi].data()[ci];
    params[pi].data_mut()[ci] = orig + 1e-5;
    let up = f(&mut params, false);
    params[pi].data_mut()[ci] = orig - 1e-5;
    let down = f(&mut params, false);
    params[pi].data_mut()[ci] = orig;
    let numeric = (up - down) / 2e-5;
    (rep.max_rel_err, pi, ci, a_store[pi][ci], numeric)
}

fn main() {
    let qdims = QmixDims { n_agents: 3, s_dim: 3, embed: 3, hyper_hidden: 4 };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    rng.set_stream(19);
    let mut worst = (0.0, 0, 0, 0.0, 0.0, 0);
    for t in 0..100 {
        let p = QmixParams::init(qdims, &mut rng);
        let r = check(&Mixer::Qmix(p), 3, 2, 3, &mut rng);
        if r.0 > worst.0 { worst = (r.0, r.1, r.2, r.3, r.4, t); }
    }
    println!("qmix worst rel {:.3e} trial {} param {} coord {} a={:.6e} n={:.6e}", worst.0, worst.5, worst.1, worst.2, worst.3, worst.4);

    let tdims = TransMixDims { n_agents: 3, s_dim: 3, agent_hidden: 4, layers: 2, heads: 2, d_model: 8, state_tokens: 2, d_skip: 4 };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    rng.set_stream(20);
    let mut worst = (0.0, 0, 0, 0.0, 0.0, 0);
    for t in 0..100 {
        let p = TransMixParams::init(tdims, &mut rng).unwrap();
        let r = check(&Mixer::TransMix(p), 3, 4, 3, &mut rng);
        if r.0 > worst.0 { worst = (r.0, r.1, r.2, r.3, r.4, t); }
    }
    println!("transmix worst rel {:.3e} trial {} param {} coord {} a={:.6e} n={:.6e}", worst.0, worst.5, worst.1, worst.2, worst.3, worst.4);
}
