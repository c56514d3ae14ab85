//! Metrics rows and the append-only CSV format.
//!
//! Header: `seed,env_steps,episodes,epsilon,train_loss,test_return_mean,
//! test_win_rate,wall_ms`. Floats carry six significant digits; lines end
//! with LF. Every row is an evaluation point.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const CSV_HEADER: &str =
    "seed,env_steps,episodes,epsilon,train_loss,test_return_mean,test_win_rate,wall_ms";

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub seed: u64,
    pub env_steps: u64,
    pub episodes: u64,
    pub epsilon: f64,
    /// Mean training loss since the previous evaluation; NaN before the
    /// first optimizer step.
    pub train_loss: f64,
    pub test_return_mean: f64,
    pub test_win_rate: f64,
    pub wall_ms: u64,
}

/// Six-significant-digit float formatting (the CSV contract).
pub fn fmt_sig6(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v == 0.0 {
        return "0.00000e0".into();
    }
    format!("{v:.5e}")
}

impl MetricsRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.seed,
            self.env_steps,
            self.episodes,
            fmt_sig6(self.epsilon),
            fmt_sig6(self.train_loss),
            fmt_sig6(self.test_return_mean),
            fmt_sig6(self.test_win_rate),
            self.wall_ms,
        )
    }

    pub fn from_csv_line(line: &str) -> Result<Self> {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 8 {
            return Err(Error::Config(format!(
                "metrics row has {} fields, expected 8: {line}",
                parts.len()
            )));
        }
        let int = |s: &str, what: &str| -> Result<u64> {
            s.parse()
                .map_err(|_| Error::Config(format!("bad {what} '{s}' in metrics row")))
        };
        let float = |s: &str, what: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::Config(format!("bad {what} '{s}' in metrics row")))
        };
        Ok(MetricsRow {
            seed: int(parts[0], "seed")?,
            env_steps: int(parts[1], "env_steps")?,
            episodes: int(parts[2], "episodes")?,
            epsilon: float(parts[3], "epsilon")?,
            train_loss: float(parts[4], "train_loss")?,
            test_return_mean: float(parts[5], "test_return_mean")?,
            test_win_rate: float(parts[6], "test_win_rate")?,
            wall_ms: int(parts[7], "wall_ms")?,
        })
    }
}

/// Append-only CSV writer; flushes after every row so a crash leaves a
/// valid prefix.
pub struct MetricsWriter {
    file: std::fs::File,
}

impl MetricsWriter {
    /// Opens for appending, writing the header only when the file is new
    /// or empty.
    pub fn open(path: &Path) -> Result<Self> {
        let existing = std::fs::metadata(path).map(|m| m.len()).unwrap_or(0);
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)?;
        if existing == 0 {
            file.write_all(CSV_HEADER.as_bytes())?;
            file.write_all(b"\n")?;
        }
        Ok(MetricsWriter { file })
    }

    pub fn append(&mut self, row: &MetricsRow) -> Result<()> {
        self.file.write_all(row.to_csv_line().as_bytes())?;
        self.file.write_all(b"\n")?;
        self.file.flush()?;
        Ok(())
    }
}

/// Reads a whole metrics file, validating the header.
pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(Error::Config(format!(
                "{} does not start with the metrics header (got {:?})",
                path.display(),
                other
            )))
        }
    }
    lines.map(MetricsRow::from_csv_line).collect()
}
