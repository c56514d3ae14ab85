//! Inspect what TransMix learned on additive2x3.
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use transmix_core::agent::{agent_step_values, assemble_input, init_hidden};
use transmix_core::envs::fixture;
use transmix_core::harness::{load_checkpoint, parse_config, read_metrics, run_train};
use transmix_core::mixers::MixerInput;

fn main() {
    let cfg = parse_config(
        r#"{
        "env": "additive2x3",
        "mixer": "transmix",
        "agent": {"hidden": 16},
        "transmix": {"layers": 2, "heads": 2, "d_model": 16, "state_tokens": 2, "d_skip": 8},
        "train": {"total_env_steps": 20000, "anneal_steps": 10000, "batch_episodes": 16,
                  "buffer_capacity": 2000},
        "eval": {"interval_steps": 4000, "episodes": 20},
        "seeds": [1],
        "out_dir": "/tmp/probe_tmix_dbg"
    }"#,
    )
    .unwrap();
    let _ = std::fs::remove_dir_all("/tmp/probe_tmix_dbg");
    let out = run_train(&cfg, 1, None).unwrap();
    for row in read_metrics(&out.paths.metrics).unwrap() {
        println!(
            "steps {:>6} eps {:.3} loss {:>10.4} return {:>7.3}",
            row.env_steps, row.epsilon, row.train_loss, row.test_return_mean
        );
    }
    let ckpt = load_checkpoint(&out.paths.checkpoint).unwrap();
    let mut env = fixture("additive2x3").unwrap().build().unwrap();
    let (obs, state) = env.reset(0);
    let params = &ckpt.learner.agent;
    let hidden = init_hidden(2, 16);
    let inputs: Vec<Vec<f64>> = (0..2)
        .map(|i| assemble_input(&obs[i], None, i, &params.dims))
        .collect();
    let (q, h) = agent_step_values(params, &inputs, &hidden).unwrap();
    println!("agent q0: {:?}", q[0].iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>());
    println!("agent q1: {:?}", q[1].iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>());
    // mixer output per chosen-q pair: feed actual q values of each joint action
    println!("payoffs r1=[0,3,1], r2=[2,0,4]; Q_tot grid (rows a0, cols a1):");
    for a0 in 0..3 {
        let mut row = String::new();
        for a1 in 0..3 {
            let input = MixerInput {
                q: vec![q[0][a0], q[1][a1]],
                histories: vec![h[0].clone(), h[1].clone()],
                state: state.clone(),
            };
            let qtot = ckpt.learner.mixer.forward_one(&input).unwrap();
            row.push_str(&format!("{:>8.3}", qtot));
        }
        println!("{row}");
    }
}
