//! Locate the worst transmix gradcheck coordinate.
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use transmix_core::mixers::{Mixer, TransMixDims, TransMixParams};
use transmix_core::nn::ParamSet;
use transmix_core::numerics::gradcheck::grad_check;
use transmix_core::numerics::tape::Tape;
use transmix_core::numerics::tensor::Tensor;

fn main() {
    let dims = TransMixDims {
        n_agents: 3, s_dim: 3, agent_hidden: 4,
        layers: 2, heads: 2, d_model: 8, state_tokens: 2, d_skip: 4,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    rng.set_stream(20); // mixer_transmix stream in the battery
    let mut worst = (0.0f64, 0usize, (0usize, 0usize));
    for trial in 0..100 {
        let p = TransMixParams::init(dims, &mut rng).unwrap();
        let mixer = Mixer::TransMix(p);
        let mut params: Vec<Tensor> = mixer.named().into_iter().map(|(_, t)| t.clone()).collect();
        let np = params.len();
        let n = 3usize;
        let dh = 4usize;
        let sd = 3usize;
        params.push(Tensor::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(), vec![1, n]).unwrap().with_grad());
        params.push(Tensor::new((0..n*dh).map(|_| rng.gen_range(-1.0..1.0)).collect(), vec![1, n, dh]).unwrap().with_grad());
        params.push(Tensor::new((0..sd).map(|_| rng.gen_range(-1.0..1.0)).collect(), vec![1, sd]).unwrap().with_grad());
        let mixer2 = mixer.clone();
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
            let loss = tape.sum_all(out);
            if want_grad {
                tape.backward(loss).unwrap();
                for (t, id) in ps.iter_mut().zip(ids.iter().chain([&q, &h, &s])) {
                    if let Some(g) = tape.grad(*id) { let g = g.to_vec(); t.accumulate_grad(&g); }
                }
            }
            tape.value(loss)[0]
        };
        let rep = grad_check(&mut f, &mut params, 1e-5, 1e-4);
        if rep.max_rel_err > worst.0 {
            worst = (rep.max_rel_err, trial, rep.worst);
        }
    }
    println!("worst rel err {} at trial {} param {:?}", worst.0, worst.1, worst.2);
    // param index -> name
    let p = TransMixParams::init(dims, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let names: Vec<String> = Mixer::TransMix(p).named().into_iter().map(|(n, _)| n).collect();
    if worst.2.0 < names.len() {
        println!("param name: {}", names[worst.2.0]);
    } else {
        println!("input index {}", worst.2.0 - names.len());
    }
}
