//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them).

mod common;

use std::path::{Path, PathBuf};
use std::time::Instant;

use common::{ref_qmix_forward, ref_transmix_forward, ref_transmix_layer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use transmix_core::battery::run_battery;
use transmix_core::envs::{fixture, EnvSpec, MatrixGame};
use transmix_core::harness::{
    collect_episode, load_checkpoint, median, parse_config, read_metrics, run_train, summarize,
    ExperimentConfig,
};
use transmix_core::mixers::{
    random_input, transmix_layer_values, Mixer, MixerInput, QmixDims, QmixParams, TransMixDims,
    TransMixParams,
};
use transmix_core::nn::ParamSet;
use transmix_core::numerics::adam::{adam_step, AdamState};
use transmix_core::numerics::tape::Tape;
use transmix_core::numerics::tensor::Tensor;

fn pass(criterion: &str, detail: &str) {
    println!("acceptance {criterion}: PASS - {detail}");
}

// --- criterion 1: gradient integrity -----------------------------------

#[test]
fn criterion_1_gradient_integrity() {
    let start = Instant::now();
    let reports = run_battery(100, 1e-5, 1e-4, 0);
    let elapsed = start.elapsed();
    for r in &reports {
        assert!(
            r.pass,
            "criterion 1: {} failed with max rel err {}",
            r.name, r.max_rel_err
        );
    }
    let worst = reports
        .iter()
        .max_by(|a, b| a.max_rel_err.total_cmp(&b.max_rel_err))
        .unwrap();
    assert!(
        elapsed.as_secs() < 120,
        "criterion 1: runtime {:?} over the 2 minute budget",
        elapsed
    );
    pass(
        "1 (gradient integrity)",
        &format!(
            "{} targets x 100 trials, worst {} at {:.2e}, {:.1}s",
            reports.len(),
            worst.name,
            worst.max_rel_err,
            elapsed.as_secs_f64()
        ),
    );
}

// --- criterion 2: mixer invariants --------------------------------------

#[test]
fn criterion_2_mixer_invariants() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);

    // VDN: exact sum identity
    for _ in 0..1000 {
        let n = rng.gen_range(1..6);
        let input = random_input(n, 3, 2, &mut rng);
        let direct: f64 = input.q.iter().sum();
        let out = Mixer::Vdn.forward_one(&input).unwrap();
        assert_eq!(out, direct, "criterion 2: VDN sum identity broke");
    }

    // QMIX: monotone in every agent value
    let qdims = QmixDims {
        n_agents: 3,
        s_dim: 4,
        embed: 8,
        hyper_hidden: 8,
    };
    for _ in 0..1000 {
        let mixer = Mixer::Qmix(QmixParams::init(qdims, &mut rng));
        let input = random_input(3, 3, 4, &mut rng);
        let grad = mixer.grad_wrt_q(&input).unwrap();
        for (i, g) in grad.iter().enumerate() {
            assert!(*g >= -1e-9, "criterion 2: dQtot/dq_{i} = {g} < -1e-9");
        }
    }

    // TransMix: permutation invariant, yet not monotonicity-constrained
    let tdims = TransMixDims {
        n_agents: 4,
        s_dim: 5,
        agent_hidden: 6,
        layers: 2,
        heads: 2,
        d_model: 8,
        state_tokens: 2,
        d_skip: 4,
    };
    let mixer = Mixer::TransMix(TransMixParams::init(tdims, &mut rng).unwrap());
    for _ in 0..100 {
        let input = random_input(4, 6, 5, &mut rng);
        let base = mixer.forward_one(&input).unwrap();
        let mut perm: Vec<usize> = (0..4).collect();
        for i in (1..4).rev() {
            let j = rng.gen_range(0..=i);
            perm.swap(i, j);
        }
        let permuted = MixerInput {
            q: perm.iter().map(|&i| input.q[i]).collect(),
            histories: perm.iter().map(|&i| input.histories[i].clone()).collect(),
            state: input.state.clone(),
        };
        let out = mixer.forward_one(&permuted).unwrap();
        assert!(
            (out - base).abs() <= 1e-9,
            "criterion 2: permutation moved Qtot by {}",
            (out - base).abs()
        );
    }
    let mut negative_found = false;
    for _ in 0..1000 {
        let draw = Mixer::TransMix(TransMixParams::random(tdims, 0.5, &mut rng).unwrap());
        let input = random_input(4, 6, 5, &mut rng);
        if draw.grad_wrt_q(&input).unwrap().iter().any(|&g| g < 0.0) {
            negative_found = true;
            break;
        }
    }
    assert!(
        negative_found,
        "criterion 2: no TransMix draw with a negative value gradient"
    );

    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs() < 60,
        "criterion 2: runtime {:?} over the 1 minute budget",
        elapsed
    );
    pass(
        "2 (mixer invariants)",
        &format!(
            "sum identity, monotonicity, permutation invariance, expressiveness in {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
}

// --- criterion 3: golden traces ------------------------------------------

#[test]
fn criterion_3_golden_traces() {
    let mut worst: f64 = 0.0;
    for (seed, d_model, heads) in [(101u64, 2, 1), (102, 4, 2), (103, 4, 1)] {
        let dims = TransMixDims {
            n_agents: 2,
            s_dim: 3,
            agent_hidden: 3,
            layers: 2,
            heads,
            d_model,
            state_tokens: 2,
            d_skip: 3,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = TransMixParams::init(dims, &mut rng).unwrap();
        let state: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let q: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let hist: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let values: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..d_model).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();

        for layer_idx in 0..2 {
            let (got_tokens, got_summary) =
                transmix_layer_values(&params, layer_idx, &state, &q, &values).unwrap();
            let (want_tokens, want_summary) =
                ref_transmix_layer(&params, layer_idx, &state, &q, &values);
            for (g, w) in got_tokens.iter().flatten().zip(want_tokens.iter().flatten()) {
                worst = worst.max((g - w).abs());
            }
            for (g, w) in got_summary.iter().zip(&want_summary) {
                worst = worst.max((g - w).abs());
            }
        }
        let got = Mixer::TransMix(params.clone())
            .forward_one(&MixerInput {
                q: q.clone(),
                histories: hist.clone(),
                state: state.clone(),
            })
            .unwrap();
        let want = ref_transmix_forward(&params, &state, &q, &hist);
        worst = worst.max((got - want).abs());

        // the qmix trace rides along as a cross-check of the other mixer
        let qp = QmixParams::init(
            QmixDims {
                n_agents: 2,
                s_dim: 3,
                embed: d_model,
                hyper_hidden: 4,
            },
            &mut rng,
        );
        let got = Mixer::Qmix(qp.clone())
            .forward_one(&MixerInput {
                q: q.clone(),
                histories: hist.clone(),
                state: state.clone(),
            })
            .unwrap();
        let want = ref_qmix_forward(&qp, &state, &q);
        worst = worst.max((got - want).abs());
    }
    assert!(
        worst <= 1e-12,
        "criterion 3: trace deviation {worst} exceeds 1e-12"
    );
    pass(
        "3 (golden traces)",
        &format!("layer and forward traces match the straight-line oracle to {worst:.2e}"),
    );
}

// --- criterion 4: representability gap -----------------------------------

/// Supervised fit of (per-agent value tables + mixer) to a payoff table.
/// Returns the final MSE over all joint actions.
fn supervised_fit(mixer: &mut Mixer, steps: usize, lr: f64, seed: u64) -> f64 {
    let spec = match fixture("nonmono3x3").unwrap() {
        EnvSpec::Matrix(m) => m,
        _ => unreachable!(),
    };
    let game = MatrixGame::new(spec.clone()).unwrap();
    let a = spec.n_actions;
    let b = a * a;
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
    let mut t0 = Tensor::new((0..a).map(|_| rng.gen_range(-0.1..0.1)).collect(), vec![a, 1])
        .unwrap()
        .with_grad();
    let mut t1 = Tensor::new((0..a).map(|_| rng.gen_range(-0.1..0.1)).collect(), vec![a, 1])
        .unwrap()
        .with_grad();
    let sizes: Vec<usize> = [a, a].iter().copied().chain(mixer.sizes()).collect();
    let mut opt = AdamState::new(&sizes, lr);
    let d_h = 2;
    let hist = vec![0.25; b * 2 * d_h];
    let state = vec![1.0; b * 2];
    let mut mse = f64::NAN;
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
        let qa = tape.matmul(oh0, ta).unwrap();
        let qb = tape.matmul(oh1, tb).unwrap();
        let q = tape.concat(&[qa, qb], 1).unwrap();
        let h = tape.constant(hist.clone(), vec![b, 2, d_h]).unwrap();
        let s = tape.constant(state.clone(), vec![b, 2]).unwrap();
        let out = mixer.forward_graph(&mut tape, &nodes, q, h, s).unwrap();
        let y = tape.constant(targets.clone(), vec![b]).unwrap();
        let diff = tape.sub(out, y).unwrap();
        let sq = tape.mul(diff, diff).unwrap();
        let total = tape.sum_all(sq);
        let loss = tape.scale(total, 1.0 / b as f64);
        mse = tape.value(loss)[0];
        tape.backward(loss).unwrap();
        if let Some(g) = tape.grad(ta) {
            let g = g.to_vec();
            t0.accumulate_grad(&g);
        }
        if let Some(g) = tape.grad(tb) {
            let g = g.to_vec();
            t1.accumulate_grad(&g);
        }
        for ((_, t), id) in mixer.named_mut().into_iter().zip(&node_ids) {
            if let Some(g) = tape.grad(*id) {
                let g = g.to_vec();
                t.accumulate_grad(&g);
            }
        }
        let mut refs: Vec<&mut Tensor> = vec![&mut t0, &mut t1];
        for (_, t) in mixer.named_mut() {
            refs.push(t);
        }
        adam_step(&mut refs, &mut opt).unwrap();
    }
    mse
}

#[test]
fn criterion_4_representability_gap() {
    let start = Instant::now();
    let (joint, value) = MatrixGame::brute_force_optimum(&match fixture("nonmono3x3").unwrap() {
        EnvSpec::Matrix(m) => m,
        _ => unreachable!(),
    });
    assert_eq!((joint, value), (vec![0, 0], 8.0), "criterion 4: oracle optimum");

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let tdims = TransMixDims {
        n_agents: 2,
        s_dim: 2,
        agent_hidden: 2,
        layers: 2,
        heads: 2,
        d_model: 16,
        state_tokens: 2,
        d_skip: 8,
    };
    let mut transmix = Mixer::TransMix(TransMixParams::init(tdims, &mut rng).unwrap());
    let mse_transmix = supervised_fit(&mut transmix, 2000, 0.01, 40);

    let qdims = QmixDims {
        n_agents: 2,
        s_dim: 2,
        embed: 16,
        hyper_hidden: 16,
    };
    let mut qmix = Mixer::Qmix(QmixParams::init(qdims, &mut rng));
    let mse_qmix = supervised_fit(&mut qmix, 2000, 0.01, 40);

    let elapsed = start.elapsed();
    assert!(
        mse_transmix < 0.1,
        "criterion 4: TransMix MSE {mse_transmix} >= 0.1"
    );
    assert!(
        mse_qmix > mse_transmix,
        "criterion 4: QMIX MSE {mse_qmix} not above TransMix {mse_transmix}"
    );
    assert!(
        elapsed.as_secs() < 120,
        "criterion 4: runtime {:?} over the 2 minute budget",
        elapsed
    );
    pass(
        "4 (representability gap)",
        &format!(
            "TransMix MSE {mse_transmix:.4} < 0.1 < QMIX MSE {mse_qmix:.4}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
}

// --- criteria 5-9: end-to-end harness runs --------------------------------

fn matrix_cfg(mixer: &str, out_dir: &Path) -> ExperimentConfig {
    parse_config(&format!(
        r#"{{
        "env": "additive2x3",
        "mixer": "{mixer}",
        "agent": {{"hidden": 16}},
        "qmix": {{"embed": 16, "hyper_hidden": 16}},
        "transmix": {{"layers": 2, "heads": 2, "d_model": 16, "state_tokens": 2, "d_skip": 8}},
        "train": {{"total_env_steps": 20000, "anneal_steps": 10000, "batch_episodes": 16,
                  "buffer_capacity": 2000}},
        "eval": {{"interval_steps": 4000, "episodes": 20}},
        "seeds": [1, 2, 3, 4, 5],
        "out_dir": "{}"
    }}"#,
        out_dir.display()
    ))
    .unwrap()
}

#[test]
fn criterion_5_matrix_game_learning() {
    let dir = tempfile::tempdir().unwrap();
    let optimum = MatrixGame::brute_force_optimum(&match fixture("additive2x3").unwrap() {
        EnvSpec::Matrix(m) => m,
        _ => unreachable!(),
    });
    assert_eq!(optimum.0, vec![1, 2]);
    assert_eq!(optimum.1, 7.0);

    for mixer in ["vdn", "qmix", "transmix"] {
        let start = Instant::now();
        let cfg = matrix_cfg(mixer, &dir.path().join(mixer));
        let mut good_seeds = 0;
        for &seed in &cfg.seeds {
            let out = run_train(&cfg, seed, None).unwrap();
            let rows = read_metrics(&out.paths.metrics).unwrap();
            let final_return = rows.last().unwrap().test_return_mean;

            // final greedy joint action from the trained checkpoint
            let ckpt = load_checkpoint(&out.paths.checkpoint).unwrap();
            let mut env = cfg.env.resolve().unwrap().build().unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let ep = collect_episode(env.as_mut(), &ckpt.learner.agent, 0.0, &mut rng, 0).unwrap();
            let greedy_joint = ep.actions[0].clone();

            if greedy_joint == optimum.0 && (final_return - optimum.1).abs() <= 0.25 {
                good_seeds += 1;
            } else {
                println!(
                    "criterion 5 note: {mixer} seed {seed} ended at joint {:?} return {:.3}",
                    greedy_joint, final_return
                );
            }
        }
        let elapsed = start.elapsed();
        assert!(
            good_seeds >= 4,
            "criterion 5: {mixer} optimal in only {good_seeds}/5 seeds"
        );
        assert!(
            elapsed.as_secs() < 300,
            "criterion 5: {mixer} runtime {:?} over the 5 minute budget",
            elapsed
        );
        pass(
            "5 (matrix-game learning)",
            &format!("{mixer}: {good_seeds}/5 seeds optimal in {:.0}s", elapsed.as_secs_f64()),
        );
    }
}

fn skirmish_cfg(out_dir: &Path) -> ExperimentConfig {
    parse_config(&format!(
        r#"{{
        "env": "skirmish-2v1",
        "mixer": "transmix",
        "agent": {{"hidden": 32}},
        "transmix": {{"layers": 2, "heads": 4, "d_model": 16, "state_tokens": 2, "d_skip": 8}},
        "train": {{"total_env_steps": 100000, "anneal_steps": 20000, "batch_episodes": 16,
                  "buffer_capacity": 2000}},
        "eval": {{"interval_steps": 10000, "episodes": 20}},
        "seeds": [1, 2, 3, 4, 5],
        "out_dir": "{}"
    }}"#,
        out_dir.display()
    ))
    .unwrap()
}

#[test]
fn criterion_6_skirmish_learning() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let cfg = skirmish_cfg(&dir.path().join("skirmish"));
    let mut initial_rates = Vec::new();
    let mut final_rates = Vec::new();
    for &seed in &cfg.seeds {
        let out = run_train(&cfg, seed, None).unwrap();
        let rows = read_metrics(&out.paths.metrics).unwrap();
        let first = rows.first().unwrap();
        assert_eq!(first.env_steps, 0);
        initial_rates.push(first.test_win_rate);
        final_rates.push(rows.last().unwrap().test_win_rate);
    }
    let med_final = median(&final_rates);
    let med_initial = median(&initial_rates);
    let elapsed = start.elapsed();
    assert!(
        med_final >= 0.6,
        "criterion 6: median final win rate {med_final} < 0.6 (finals {final_rates:?})"
    );
    assert!(
        med_final > med_initial,
        "criterion 6: no improvement over the initial evaluation ({med_initial} -> {med_final})"
    );
    assert!(
        elapsed.as_secs() < 1800,
        "criterion 6: runtime {:?} over the 30 minute budget",
        elapsed
    );
    pass(
        "6 (skirmish learning)",
        &format!(
            "median win rate {med_initial:.2} -> {med_final:.2} across 5 seeds in {:.0}s",
            elapsed.as_secs_f64()
        ),
    );
}

fn noise_cfg(mixer: &str, noisy: bool, out_dir: &Path) -> ExperimentConfig {
    parse_config(&format!(
        r#"{{
        "env": "skirmish-3v3",
        "mixer": "{mixer}",
        "agent": {{"hidden": 24}},
        "qmix": {{"embed": 16, "hyper_hidden": 16}},
        "transmix": {{"layers": 2, "heads": 4, "d_model": 16, "state_tokens": 2, "d_skip": 8}},
        "train": {{"total_env_steps": 6000, "anneal_steps": 3000, "batch_episodes": 16,
                  "buffer_capacity": 1000}},
        "eval": {{"interval_steps": 3000, "episodes": 20}},
        "noise": {{"enabled": {noisy}, "sigma": 0.05}},
        "seeds": [1, 2, 3, 4, 5],
        "out_dir": "{}"
    }}"#,
        out_dir.display()
    ))
    .unwrap()
}

#[test]
fn criterion_7_noise_robustness_table() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut dirs: Vec<PathBuf> = Vec::new();
    for mixer in ["transmix", "qmix"] {
        for noisy in [false, true] {
            let sub = dir
                .path()
                .join(format!("{mixer}-{}", if noisy { "noisy" } else { "clean" }));
            let cfg = noise_cfg(mixer, noisy, &sub);
            for &seed in &cfg.seeds {
                run_train(&cfg, seed, None).unwrap();
            }
            dirs.push(sub);
        }
    }

    let summary = summarize(&dirs).unwrap();
    let table = summary.to_table();
    println!("{table}");
    // hard gate: the paired clean/noisy/drop table is well-formed
    assert_eq!(summary.groups.len(), 4, "criterion 7: expected 4 groups");
    assert_eq!(summary.pairs.len(), 2, "criterion 7: expected 2 clean/noisy pairs");
    for p in &summary.pairs {
        assert_eq!(p.env, "skirmish-3v3");
        assert_eq!(p.sigma, 0.05);
        assert!(p.clean_win_rate.is_finite() && p.noisy_win_rate.is_finite());
        assert!((p.drop - (p.clean_win_rate - p.noisy_win_rate)).abs() < 1e-12);
        assert!(table.contains(&p.mixer), "criterion 7: {} missing from table", p.mixer);
    }
    let drop_of = |mixer: &str| {
        summary
            .pairs
            .iter()
            .find(|p| p.mixer == mixer)
            .map(|p| p.drop)
            .expect("pair present")
    };
    let (tm_drop, qm_drop) = (drop_of("transmix"), drop_of("qmix"));
    // reported, non-gating: seed-sensitive at desk scale
    println!(
        "criterion 7 report: median win-rate drop transmix {tm_drop:.3} vs qmix {qm_drop:.3} ({})",
        if tm_drop <= qm_drop {
            "transmix drop <= qmix drop"
        } else {
            "transmix drop above qmix drop on these seeds"
        }
    );
    pass(
        "7 (noise robustness table)",
        &format!(
            "paired clean/noisy table emitted for 2 mixers x 5 seeds in {:.0}s",
            start.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn criterion_8_protocol_fidelity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(&format!(
        r#"{{
        "env": "additive2x3",
        "mixer": "vdn",
        "agent": {{"hidden": 8}},
        "train": {{"total_env_steps": 60000, "anneal_steps": 50000, "batch_episodes": 16,
                  "buffer_capacity": 5000, "eps_start": 1.0, "eps_end": 0.05,
                  "target_update_episodes": 200}},
        "eval": {{"interval_steps": 10000, "episodes": 20}},
        "seeds": [1],
        "out_dir": "{}"
    }}"#,
        dir.path().join("protocol").display()
    ))
    .unwrap();
    let out = run_train(&cfg, 1, None).unwrap();

    // metrics: epsilon endpoints and exact eval cadence
    let rows = read_metrics(&out.paths.metrics).unwrap();
    let steps: Vec<u64> = rows.iter().map(|r| r.env_steps).collect();
    assert_eq!(
        steps,
        vec![0, 10000, 20000, 30000, 40000, 50000, 60000],
        "criterion 8: evals not exactly every 10k steps"
    );
    assert_eq!(rows[0].epsilon, 1.0, "criterion 8: epsilon(0) != 1.0");
    let at_anneal = rows.iter().find(|r| r.env_steps == 50000).unwrap();
    assert_eq!(at_anneal.epsilon, 0.05, "criterion 8: epsilon(50k) != 0.05");

    // run log: sync exactly every 200 episodes, 20-episode evals
    let log = std::fs::read_to_string(&out.paths.log).unwrap();
    let syncs: Vec<u64> = log
        .lines()
        .filter_map(|l| l.strip_prefix("target_sync episode="))
        .map(|rest| rest.split_whitespace().next().unwrap().parse().unwrap())
        .collect();
    let expected: Vec<u64> = (1..=300).map(|k| k * 200).collect();
    assert_eq!(syncs, expected, "criterion 8: target syncs not every 200 episodes");
    let eval_lines: Vec<&str> = log.lines().filter(|l| l.starts_with("eval ")).collect();
    assert_eq!(eval_lines.len(), 7);
    assert!(
        eval_lines.iter().all(|l| l.contains("eval_episodes=20")),
        "criterion 8: evaluations did not use 20 episodes"
    );
    pass(
        "8 (protocol fidelity)",
        "epsilon 1.0 -> 0.05 at 50k, evals every 10k x 20 episodes, syncs every 200 episodes",
    );
}

#[test]
fn criterion_9_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let make = |name: &str| {
        parse_config(&format!(
            r#"{{
            "env": "additive2x3",
            "mixer": "vdn",
            "agent": {{"hidden": 8}},
            "train": {{"total_env_steps": 2000, "anneal_steps": 1000, "batch_episodes": 8,
                      "buffer_capacity": 256}},
            "eval": {{"interval_steps": 500, "episodes": 10}},
            "seeds": [11],
            "workers": 1,
            "out_dir": "{}"
        }}"#,
            dir.path().join(name).display()
        ))
        .unwrap()
    };
    let out_a = run_train(&make("a"), 11, None).unwrap();
    let out_b = run_train(&make("b"), 11, None).unwrap();
    let read = |p: &Path| std::fs::read_to_string(p).unwrap();
    let mask_wall = |text: String| -> String {
        text.lines()
            .map(|line| {
                if line.starts_with("seed") {
                    line.to_string()
                } else {
                    let mut parts: Vec<&str> = line.split(',').collect();
                    parts[7] = "-";
                    parts.join(",")
                }
            })
            .collect::<Vec<_>>()
            .join("\n")
    };
    let a = read(&out_a.paths.metrics);
    let b = read(&out_b.paths.metrics);
    // wall_ms is wall-clock time and physically cannot reproduce; every
    // other byte of the two runs must match exactly
    assert_eq!(mask_wall(a), mask_wall(b), "criterion 9: runs diverged");
    pass(
        "9 (reproducibility)",
        "two identical train invocations produced byte-identical metrics (wall_ms aside)",
    );
}
