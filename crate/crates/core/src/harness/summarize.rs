//! Multi-seed summaries: medians of final evaluation metrics, plus paired
//! clean/noisy comparisons for noise experiments.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::checkpoint::load_checkpoint;
use crate::harness::config::{load_config, ExperimentConfig};
use crate::harness::metrics::{fmt_sig6, read_metrics, MetricsRow};

/// Final row per seed for one experiment directory.
#[derive(Debug, Clone)]
pub struct RunGroup {
    pub dir: PathBuf,
    pub config: ExperimentConfig,
    pub digest: String,
    pub finals: Vec<MetricsRow>,
}

#[derive(Debug, Clone)]
pub struct GroupSummary {
    pub dir: String,
    pub env: String,
    pub mixer: String,
    pub noisy: bool,
    pub sigma: f64,
    pub seeds: usize,
    pub median_win_rate: f64,
    pub median_return: f64,
}

/// A clean/noisy pair of otherwise identical configs.
#[derive(Debug, Clone)]
pub struct NoisePair {
    pub env: String,
    pub mixer: String,
    pub sigma: f64,
    pub clean_win_rate: f64,
    pub noisy_win_rate: f64,
    pub drop: f64,
}

#[derive(Debug, Clone)]
pub struct Summary {
    pub groups: Vec<GroupSummary>,
    pub pairs: Vec<NoisePair>,
}

/// Median; for an even count, the mean of the middle order statistics.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in medians"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Loads one experiment directory: config plus the final metrics row of
/// every seed file. Checkpoints, when present, must carry the directory's
/// config digest.
pub fn load_run_group(dir: &Path) -> Result<RunGroup> {
    let config = load_config(&dir.join("config.json"))?;
    let digest = config.digest();
    let mut finals = Vec::new();
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for path in &entries {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with("metrics_seed") && name.ends_with(".csv") {
            let rows = read_metrics(path)?;
            let last = rows.last().ok_or_else(|| {
                Error::Config(format!("{} holds no metrics rows", path.display()))
            })?;
            finals.push(last.clone());
        } else if name.starts_with("ckpt_seed") && name.ends_with(".bin") {
            let ckpt = load_checkpoint(path)?;
            if ckpt.digest != digest {
                return Err(Error::DigestMismatch {
                    expected: digest,
                    found: ckpt.digest,
                });
            }
        }
    }
    if finals.is_empty() {
        return Err(Error::Config(format!(
            "no metrics_seed*.csv files under {}",
            dir.display()
        )));
    }
    Ok(RunGroup {
        dir: dir.to_path_buf(),
        config,
        digest,
        finals,
    })
}

/// True when two configs differ only in their noise block.
fn noise_counterparts(a: &ExperimentConfig, b: &ExperimentConfig) -> bool {
    let mut a = a.clone();
    let mut b = b.clone();
    a.noise = Default::default();
    b.noise = Default::default();
    a.out_dir = String::new();
    b.out_dir = String::new();
    a == b
}

pub fn summarize(dirs: &[PathBuf]) -> Result<Summary> {
    let groups: Vec<RunGroup> = dirs.iter().map(|d| load_run_group(d)).collect::<Result<_>>()?;
    let summaries: Vec<GroupSummary> = groups
        .iter()
        .map(|g| {
            let wins: Vec<f64> = g.finals.iter().map(|r| r.test_win_rate).collect();
            let rets: Vec<f64> = g.finals.iter().map(|r| r.test_return_mean).collect();
            GroupSummary {
                dir: g.dir.display().to_string(),
                env: g.config.env.display_name(),
                mixer: g.config.mixer.name().to_string(),
                noisy: g.config.noise.enabled,
                sigma: g.config.noise.sigma,
                seeds: g.finals.len(),
                median_win_rate: median(&wins),
                median_return: median(&rets),
            }
        })
        .collect();

    let mut pairs = Vec::new();
    for (i, a) in groups.iter().enumerate() {
        if a.config.noise.enabled {
            continue;
        }
        for (j, b) in groups.iter().enumerate() {
            if i == j || !b.config.noise.enabled {
                continue;
            }
            if noise_counterparts(&a.config, &b.config) {
                let clean = summaries[i].median_win_rate;
                let noisy = summaries[j].median_win_rate;
                pairs.push(NoisePair {
                    env: a.config.env.display_name(),
                    mixer: a.config.mixer.name().to_string(),
                    sigma: b.config.noise.sigma,
                    clean_win_rate: clean,
                    noisy_win_rate: noisy,
                    drop: clean - noisy,
                });
            }
        }
    }

    Ok(Summary {
        groups: summaries,
        pairs,
    })
}

impl Summary {
    /// Aligned text table, one block per experiment plus the paired
    /// clean/noisy comparison when noise runs are present.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<24} {:<10} {:<6} {:>8} {:>6} {:>14} {:>14}\n",
            "env", "mixer", "noisy", "sigma", "seeds", "median_win", "median_return"
        ));
        for g in &self.groups {
            out.push_str(&format!(
                "{:<24} {:<10} {:<6} {:>8} {:>6} {:>14.4} {:>14.4}\n",
                g.env,
                g.mixer,
                if g.noisy { "yes" } else { "no" },
                if g.noisy {
                    format!("{:.3}", g.sigma)
                } else {
                    "-".to_string()
                },
                g.seeds,
                g.median_win_rate,
                g.median_return
            ));
        }
        if !self.pairs.is_empty() {
            out.push('\n');
            out.push_str(&format!(
                "{:<24} {:<10} {:>8} {:>12} {:>12} {:>8}\n",
                "env", "mixer", "sigma", "clean_win", "noisy_win", "drop"
            ));
            for p in &self.pairs {
                out.push_str(&format!(
                    "{:<24} {:<10} {:>8.3} {:>12.4} {:>12.4} {:>8.4}\n",
                    p.env, p.mixer, p.sigma, p.clean_win_rate, p.noisy_win_rate, p.drop
                ));
            }
        }
        out
    }

    /// Machine-readable rows mirroring the text table.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("kind,env,mixer,noisy,sigma,seeds,median_win_rate,median_return,drop\n");
        for g in &self.groups {
            out.push_str(&format!(
                "group,{},{},{},{},{},{},{},\n",
                g.env,
                g.mixer,
                g.noisy,
                fmt_sig6(g.sigma),
                g.seeds,
                fmt_sig6(g.median_win_rate),
                fmt_sig6(g.median_return)
            ));
        }
        for p in &self.pairs {
            out.push_str(&format!(
                "pair,{},{},true,{},,{},{},{}\n",
                p.env,
                p.mixer,
                fmt_sig6(p.sigma),
                fmt_sig6(p.clean_win_rate),
                fmt_sig6(p.noisy_win_rate),
                fmt_sig6(p.drop)
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_odd_and_even() {
        assert_eq!(median(&[0.2, 0.6, 1.0]), 0.6);
        assert_eq!(median(&[0.7]), 0.7);
        assert_eq!(median(&[0.2, 0.6, 1.0, 0.0, 0.4]), 0.4);
        assert_eq!(median(&[1.0, 3.0]), 2.0);
    }
}
