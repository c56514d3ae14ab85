//! Command-line entry points: train, eval, summarize, gradcheck.
//!
//! Exit codes: 0 on success, 1 on validation errors (bad config, bad
//! arguments, digest mismatches), 2 on numerical aborts (non-finite loss
//! or gradients, failed gradient checks).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use transmix_core::battery::run_battery;
use transmix_core::error::Error;
use transmix_core::harness::{
    eval_checkpoint, load_checkpoint, load_config, run_train, summarize,
};

#[derive(Parser)]
#[command(name = "transmix", version, about = "Cooperative multi-agent Q-learning with VDN, QMIX and TransMix mixers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train each configured seed (or one overridden seed) to completion.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Train only this seed instead of every seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config's parallel episode worker count.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Evaluate a checkpoint greedily and print win rate and mean return.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 20)]
        episodes: usize,
        /// Override the noise level of the stored config.
        #[arg(long)]
        noise_sigma: Option<f64>,
    },
    /// Summarize one or more run directories (medians across seeds).
    Summarize {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
    /// Check analytic gradients against central differences.
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    if err.is_numerical() {
        2
    } else {
        1
    }
}

fn run() -> Result<(), (String, u8)> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train {
            config,
            seed,
            out,
            workers,
        } => {
            let mut cfg = load_config(&config).map_err(|e| (e.to_string(), exit_code_for(&e)))?;
            if let Some(out) = out {
                cfg.out_dir = out.display().to_string();
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            cfg.validate().map_err(|e| (e.to_string(), exit_code_for(&e)))?;
            let seeds: Vec<u64> = match seed {
                Some(s) => vec![s],
                None => cfg.seeds.clone(),
            };
            for s in seeds {
                let out = run_train(&cfg, s, None)
                    .map_err(|e| (e.to_string(), exit_code_for(&e)))?;
                println!(
                    "seed {s}: env_steps={} episodes={} win_rate={:.4} return_mean={:.4} -> {}",
                    out.env_steps,
                    out.episodes,
                    out.final_eval.win_rate,
                    out.final_eval.return_mean,
                    out.paths.metrics.display()
                );
            }
            Ok(())
        }
        Command::Eval {
            checkpoint,
            episodes,
            noise_sigma,
        } => {
            if episodes == 0 {
                return Err(("eval needs at least one episode".into(), 1));
            }
            let ckpt =
                load_checkpoint(&checkpoint).map_err(|e| (e.to_string(), exit_code_for(&e)))?;
            let outcome = eval_checkpoint(&ckpt, episodes, noise_sigma)
                .map_err(|e| (e.to_string(), exit_code_for(&e)))?;
            println!(
                "episodes={episodes} win_rate={:.4} return_mean={:.4}",
                outcome.win_rate, outcome.return_mean
            );
            Ok(())
        }
        Command::Summarize { dirs } => {
            let summary = summarize(&dirs).map_err(|e| (e.to_string(), exit_code_for(&e)))?;
            print!("{}", summary.to_table());
            Ok(())
        }
        Command::Gradcheck { trials, tol } => {
            if trials == 0 || !(tol > 0.0) {
                return Err(("gradcheck needs trials >= 1 and tol > 0".into(), 1));
            }
            let reports = run_battery(trials, 1e-5, tol, 0);
            let mut all_pass = true;
            for r in &reports {
                println!(
                    "{:<16} trials={:<4} max_rel_err={:.3e}  {}",
                    r.name,
                    r.trials,
                    r.max_rel_err,
                    if r.pass { "PASS" } else { "FAIL" }
                );
                all_pass &= r.pass;
            }
            if all_pass {
                Ok(())
            } else {
                Err(("gradient check failed".into(), 2))
            }
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err((msg, code)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
