//! Skirmish-2v1 learning probe at acceptance-criterion scale.
use transmix_core::harness::{parse_config, read_metrics, run_train};

fn main() {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1);
    let cfg = parse_config(
        r#"{
        "env": "skirmish-2v1",
        "mixer": "transmix",
        "agent": {"hidden": 32},
        "transmix": {"layers": 2, "heads": 4, "d_model": 16, "state_tokens": 2, "d_skip": 8},
        "train": {"total_env_steps": 100000, "anneal_steps": 20000, "batch_episodes": 16,
                  "buffer_capacity": 2000, "gamma": 0.99},
        "eval": {"interval_steps": 10000, "episodes": 20},
        "seeds": [1],
        "out_dir": "/tmp/probe_skirmish"
    }"#,
    )
    .unwrap();
    let _ = std::fs::remove_dir_all("/tmp/probe_skirmish");
    let t0 = std::time::Instant::now();
    let out = run_train(&cfg, seed, None).unwrap();
    for row in read_metrics(&out.paths.metrics).unwrap() {
        println!(
            "steps {:>7} eps {:.3} loss {:>10.3} win {:>5.2} return {:>8.2}",
            row.env_steps, row.epsilon, row.train_loss, row.test_win_rate, row.test_return_mean
        );
    }
    println!("seed {seed}: {:.0}s total", t0.elapsed().as_secs_f64());
}
