//! Inspect analytic vs numeric at the worst transmix coordinate.
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use transmix_core::mixers::{Mixer, TransMixDims, TransMixParams};
use transmix_core::nn::ParamSet;
use transmix_core::numerics::tape::Tape;
use transmix_core::numerics::tensor::Tensor;

fn main() {
    let dims = TransMixDims {
        n_agents: 3, s_dim: 3, agent_hidden: 4,
        layers: 2, heads: 2, d_model: 8, state_tokens: 2, d_skip: 4,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    rng.set_stream(20);
    // replay to trial 35
    let mut stash = None;
    for trial in 0..=35 {
        let p = TransMixParams::init(dims, &mut rng).unwrap();
        let q: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if trial == 35 { stash = Some((p, q, h, s)); }
    }
    let (p, q, h, s) = stash.unwrap();
    let eval = |p: &TransMixParams, q: &[f64], h: &[f64], s: &[f64]| -> f64 {
        let m = Mixer::TransMix(p.clone());
        let mut tape = Tape::new();
        let nodes = m.bind(&mut tape);
        let qn = tape.param(&Tensor::new(q.to_vec(), vec![1, 3]).unwrap());
        let hn = tape.param(&Tensor::new(h.to_vec(), vec![1, 3, 4]).unwrap());
        let sn = tape.param(&Tensor::new(s.to_vec(), vec![1, 3]).unwrap());
        let out = m.forward_graph(&mut tape, &nodes, qn, hn, sn).unwrap();
        tape.value(out)[0]
    };
    // analytic grad of w_beta[7] in layer 0
    let m = Mixer::TransMix(p.clone());
    let mut tape = Tape::new();
    let nodes = m.bind(&mut tape);
    let ids = nodes.flat();
    let qn = tape.constant(q.clone(), vec![1, 3]).unwrap();
    let hn = tape.constant(h.clone(), vec![1, 3, 4]).unwrap();
    let sn = tape.constant(s.clone(), vec![1, 3]).unwrap();
    let out = m.forward_graph(&mut tape, &nodes, qn, hn, sn).unwrap();
    let loss = tape.sum_all(out);
    tape.backward(loss).unwrap();
    let a = tape.grad(ids[5]).unwrap()[7]; // layer0.w_beta coordinate 7
    // numeric
    let hstep = 1e-5;
    let mut p_up = p.clone();
    p_up.layers[0].w_beta.data_mut()[7] += hstep;
    let mut p_dn = p.clone();
    p_dn.layers[0].w_beta.data_mut()[7] -= hstep;
    let n = (eval(&p_up, &q, &h, &s) - eval(&p_dn, &q, &h, &s)) / (2.0 * hstep);
    println!("analytic {a:e}  numeric {n:e}  abs diff {:e}", (a - n).abs());
    // tighter h for comparison
    for hs in [1e-4, 1e-3] {
        let mut pu = p.clone(); pu.layers[0].w_beta.data_mut()[7] += hs;
        let mut pd = p.clone(); pd.layers[0].w_beta.data_mut()[7] -= hs;
        let nn = (eval(&pu, &q, &h, &s) - eval(&pd, &q, &h, &s)) / (2.0 * hs);
        println!("h={hs:e}: numeric {nn:e}  abs diff {:e}", (a - nn).abs());
    }
}
