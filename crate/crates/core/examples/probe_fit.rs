//! Representability probe: supervised fit of mixers onto nonmono3x3.
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use transmix_core::envs::{fixture, EnvSpec, MatrixGame};
use transmix_core::mixers::{Mixer, QmixDims, QmixParams, TransMixDims, TransMixParams};
use transmix_core::nn::ParamSet;
use transmix_core::numerics::adam::{adam_step, AdamState};
use transmix_core::numerics::tape::Tape;
use transmix_core::numerics::tensor::Tensor;

fn fit(mixer: &mut Mixer, steps: usize, lr: f64, seed: u64) -> f64 {
    let spec = match fixture("nonmono3x3").unwrap() {
        EnvSpec::Matrix(m) => m,
        _ => unreachable!(),
    };
    let game = MatrixGame::new(spec.clone()).unwrap();
    let (n, a) = (2usize, 3usize);
    let b = a * a; // all joint actions
    // targets + one-hot selectors
    let mut targets = Vec::with_capacity(b);
    let mut onehot0 = vec![0.0; b * a];
    let mut onehot1 = vec![0.0; b * a];
    for a0 in 0..a {
        for a1 in 0..a {
            let idx = a0 * a + a1;
            targets.push(spec.payoff[game.payoff_index(&[a0, a1])]);
            onehot0[idx * a + a0] = 1.0;
            onehot1[idx * a + a1] = 1.0;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    use rand::Rng;
    let mut q_table = Tensor::new(
        (0..n * a).map(|_| rng.gen_range(-0.1..0.1)).collect(),
        vec![n, a],
    )
    .unwrap()
    .with_grad();

    let sizes: Vec<usize> = std::iter::once(q_table.data().len())
        .chain(mixer.sizes())
        .collect();
    let mut opt = AdamState::new(&sizes, lr);
    let d_h = 2usize;
    let hist = vec![0.25; b * n * d_h];
    let state = vec![1.0; b * n];
    let mut last = f64::NAN;
    for _ in 0..steps {
        q_table.zero_grad();
        mixer.zero_grads();
        let mut tape = Tape::new();
        let nodes = mixer.bind(&mut tape);
        let node_ids = nodes.flat();
        let qt = tape.param(&q_table);
        // per-agent chosen q for every joint action, via one-hot matmul
        let oh0 = tape.constant(onehot0.clone(), vec![b, a]).unwrap();
        let oh1 = tape.constant(onehot1.clone(), vec![b, a]).unwrap();
        let q0 = tape.reshape(qt, vec![n * a, 1]).unwrap();
        let _ = q0;
        // row 0 of the table: [a] -> matmul oh0 [b,a] x table_row0 [a,1]
        let row0 = tape.reshape(qt, vec![n, a]).unwrap();
        let _ = row0;
        // simpler: slice via constants is unavailable; use two tables
        drop(tape);
        break;
    }
    // two separate per-agent tables instead
    let mut t0 = Tensor::new((0..a).map(|_| rng.gen_range(-0.1..0.1)).collect(), vec![a, 1]).unwrap().with_grad();
    let mut t1 = Tensor::new((0..a).map(|_| rng.gen_range(-0.1..0.1)).collect(), vec![a, 1]).unwrap().with_grad();
    let sizes: Vec<usize> = [a, a].iter().copied().chain(mixer.sizes()).collect();
    let mut opt2 = AdamState::new(&sizes, lr);
    let _ = &mut opt;
    for _ in 0..steps {
        t0.zero_grad();
        t1.zero_grad();
        mixer.zero_grads();
        let mut tape = Tape::new();
        let nodes = mixer.bind(&mut tape);
        let node_ids = nodes.flat();
        let ta = tape.param(&t0);
        let tb = tape.param(&t1);
        let oh0 = tape.constant(onehot0.clone(), vec![b, a]).unwrap();
        let oh1 = tape.constant(onehot1.clone(), vec![b, a]).unwrap();
        let qa = tape.matmul(oh0, ta).unwrap(); // [b, 1]
        let qb = tape.matmul(oh1, tb).unwrap();
        let q = tape.concat(&[qa, qb], 1).unwrap(); // [b, 2]
        let h = tape.constant(hist.clone(), vec![b, n, d_h]).unwrap();
        let s = tape.constant(state.clone(), vec![b, n]).unwrap();
        let out = mixer.forward_graph(&mut tape, &nodes, q, h, s).unwrap();
        let y = tape.constant(targets.clone(), vec![b]).unwrap();
        let diff = tape.sub(out, y).unwrap();
        let sq = tape.mul(diff, diff).unwrap();
        let total = tape.sum_all(sq);
        let loss = tape.scale(total, 1.0 / b as f64);
        last = tape.value(loss)[0];
        tape.backward(loss).unwrap();
        for (t, id) in [&mut t0, &mut t1].into_iter().zip([qa, qb]) {
            let _ = id;
            let _ = t;
        }
        if let Some(g) = tape.grad(ta) { let g = g.to_vec(); t0.accumulate_grad(&g); }
        if let Some(g) = tape.grad(tb) { let g = g.to_vec(); t1.accumulate_grad(&g); }
        for ((_, t), id) in mixer.named_mut().into_iter().zip(&node_ids) {
            if let Some(g) = tape.grad(*id) { let g = g.to_vec(); t.accumulate_grad(&g); }
        }
        let mut refs: Vec<&mut Tensor> = vec![&mut t0, &mut t1];
        for (_, t) in mixer.named_mut() { refs.push(t); }
        adam_step(&mut refs, &mut opt2).unwrap();
    }
    last
}

fn main() {
    for lr in [0.005, 0.01, 0.02] {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tdims = TransMixDims {
            n_agents: 2, s_dim: 2, agent_hidden: 2,
            layers: 2, heads: 2, d_model: 16, state_tokens: 2, d_skip: 8,
        };
        let mut tmix = Mixer::TransMix(TransMixParams::init(tdims, &mut rng).unwrap());
        let t_mse = fit(&mut tmix, 2000, lr, 1);
        let qdims = QmixDims { n_agents: 2, s_dim: 2, embed: 16, hyper_hidden: 16 };
        let mut qmix = Mixer::Qmix(QmixParams::init(qdims, &mut rng));
        let q_mse = fit(&mut qmix, 2000, lr, 1);
        println!("lr {lr}: transmix MSE {t_mse:.4}, qmix MSE {q_mse:.4}");
    }
}
