//! Matrix-game probe for the state-conditioned mixers.
use transmix_core::harness::{parse_config, run_train};

fn main() {
    for mixer in ["qmix", "transmix"] {
        let cfg = parse_config(&format!(
            r#"{{
            "env": "additive2x3",
            "mixer": "{mixer}",
            "agent": {{"hidden": 16}},
            "qmix": {{"embed": 16, "hyper_hidden": 16}},
            "transmix": {{"layers": 2, "heads": 2, "d_model": 16, "state_tokens": 2, "d_skip": 8}},
            "train": {{"total_env_steps": 20000, "anneal_steps": 10000, "batch_episodes": 16,
                      "buffer_capacity": 2000}},
            "eval": {{"interval_steps": 4000, "episodes": 20}},
            "seeds": [1],
            "out_dir": "/tmp/probe_matrix2_{mixer}"
        }}"#
        ))
        .unwrap();
        let _ = std::fs::remove_dir_all(format!("/tmp/probe_matrix2_{mixer}"));
        for seed in [1, 2] {
            let t0 = std::time::Instant::now();
            let out = run_train(&cfg, seed, None).unwrap();
            println!(
                "{mixer} seed {seed}: final return {:.3} (opt 7.0) in {:.1}s",
                out.final_eval.return_mean,
                t0.elapsed().as_secs_f64()
            );
        }
    }
}
