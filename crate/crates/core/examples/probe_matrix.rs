//! Quick probe: does the full loop learn additive2x3?
use transmix_core::harness::{parse_config, run_train};

fn main() {
    let t0 = std::time::Instant::now();
    let cfg = parse_config(
        r#"{
        "env": "additive2x3",
        "mixer": "vdn",
        "agent": {"hidden": 16},
        "train": {"total_env_steps": 20000, "anneal_steps": 10000, "batch_episodes": 16,
                  "buffer_capacity": 2000},
        "eval": {"interval_steps": 2000, "episodes": 20},
        "seeds": [1],
        "out_dir": "/tmp/probe_matrix"
    }"#,
    )
    .unwrap();
    let _ = std::fs::remove_dir_all("/tmp/probe_matrix");
    for seed in [1, 2, 3] {
        let out = run_train(&cfg, seed, None).unwrap();
        println!(
            "seed {seed}: final return_mean {:.3} (optimum 7.0), steps {}, episodes {}, {:.1}s",
            out.final_eval.return_mean,
            out.env_steps,
            out.episodes,
            t0.elapsed().as_secs_f64()
        );
    }
}
