//! On-disk layout of a training run.
//!
//! ```text
//! config.json              trainer config and run metadata
//! trajectory.csv           one row per epoch, epoch 0 is the initial state
//! final_losses_train.csv   id,loss
//! final_losses_test.csv    id,loss
//! multipliers.csv          id,lambda
//! checkpoint.bin/.shape    final parameters
//! status.txt               "completed" or "aborted: <reason>"
//! run.json                 final metrics, pass counts, wall clock
//! ```
//!
//! Everything except `run.json` is a deterministic function of config and seed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::MultiplierState;
use crate::models::ModelParams;
use crate::trainer::{EpochMetrics, PassCounts, RunRecord, RunStatus, TrainerConfig};

pub const TRAJECTORY_HEADER: &str = "epoch,train_mean_loss,train_max_loss,train_accuracy,train_satisfied_fraction,\
test_mean_loss,test_max_loss,test_accuracy,test_satisfied_fraction,\
lambda_min,lambda_mean,lambda_max,lambda_fraction_zero";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ConfigFile {
    trainer: TrainerConfig,
    metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunFile {
    #[serde(flatten)]
    status: RunStatus,
    wall_clock_secs: f64,
    passes: PassCounts,
    initial: EpochMetrics,
    last: EpochMetrics,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn trajectory_csv(record: &RunRecord) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for m in std::iter::once(&record.initial).chain(&record.trajectory) {
        let (tm, tx, ta, ts) = match &m.test {
            Some(t) => (Some(t.mean_loss), Some(t.max_loss), t.accuracy, t.satisfied_fraction),
            None => (None, None, None, None),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            m.epoch,
            m.train.mean_loss,
            m.train.max_loss,
            opt(m.train.accuracy),
            opt(m.train.satisfied_fraction),
            opt(tm),
            opt(tx),
            opt(ta),
            opt(ts),
            m.multipliers.min,
            m.multipliers.mean,
            m.multipliers.max,
            m.multipliers.fraction_zero,
        );
    }
    out
}

fn losses_csv(losses: &[f64]) -> String {
    let mut out = String::from("id,loss\n");
    for (i, l) in losses.iter().enumerate() {
        let _ = writeln!(out, "{i},{l}");
    }
    out
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))
}

fn read(dir: &Path, name: &str) -> Result<String> {
    let path = dir.join(name);
    std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))
}

impl RunRecord {
    /// Writes the run directory, creating it if needed.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let config = ConfigFile {
            trainer: self.config.clone(),
            metadata: self.metadata.clone(),
        };
        write(dir, "config.json", &serde_json::to_string_pretty(&config)?)?;
        write(dir, "trajectory.csv", &trajectory_csv(self))?;
        write(dir, "final_losses_train.csv", &losses_csv(&self.train_losses))?;
        write(dir, "final_losses_test.csv", &losses_csv(&self.test_losses))?;
        self.multipliers.write_csv(dir.join("multipliers.csv"))?;
        self.model.save_checkpoint(dir, "checkpoint")?;
        let status = match &self.status {
            RunStatus::Completed => "completed\n".to_string(),
            RunStatus::Aborted { reason } => format!("aborted: {reason}\n"),
        };
        write(dir, "status.txt", &status)?;
        let run = RunFile {
            status: self.status.clone(),
            wall_clock_secs: self.wall_clock_secs,
            passes: self.passes,
            initial: self.initial.clone(),
            last: self.last().clone(),
        };
        write(dir, "run.json", &serde_json::to_string_pretty(&run)?)
    }
}

/// A run read back from disk; enough to compare runs without retraining.
#[derive(Debug, Clone)]
pub struct PersistedRun {
    pub config: TrainerConfig,
    pub metadata: BTreeMap<String, String>,
    pub status: RunStatus,
    pub wall_clock_secs: f64,
    pub passes: PassCounts,
    pub initial: EpochMetrics,
    pub last: EpochMetrics,
    pub train_losses: Vec<f64>,
    pub test_losses: Vec<f64>,
    pub multipliers: MultiplierState,
    pub model: ModelParams,
}

fn read_losses(dir: &Path, name: &str) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(dir.join(name))?;
    let mut rows: Vec<(usize, f64)> = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec?);
    }
    rows.sort_by_key(|r| r.0);
    if rows.iter().enumerate().any(|(i, r)| r.0 != i) {
        return Err(Error::Format {
            what: "loss csv",
            detail: format!("{name}: ids are not a permutation of 0..n"),
        });
    }
    Ok(rows.into_iter().map(|r| r.1).collect())
}

impl PersistedRun {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let config: ConfigFile = serde_json::from_str(&read(dir, "config.json")?)?;
        let run: RunFile = serde_json::from_str(&read(dir, "run.json")?)?;
        Ok(Self {
            config: config.trainer,
            metadata: config.metadata,
            status: run.status,
            wall_clock_secs: run.wall_clock_secs,
            passes: run.passes,
            initial: run.initial,
            last: run.last,
            train_losses: read_losses(dir, "final_losses_train.csv")?,
            test_losses: read_losses(dir, "final_losses_test.csv")?,
            multipliers: MultiplierState::read_csv(dir.join("multipliers.csv"))?,
            model: ModelParams::load_checkpoint(dir, "checkpoint")?,
        })
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.get(key).map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_two_moons;
    use crate::feasibility::Epsilon;
    use crate::models::{Architecture, Init};
    use crate::trainer::{train, Method};

    #[test]
    fn save_and_load_round_trip() {
        let ds = gen_two_moons(40, 0.1, 0).unwrap();
        let (tr, te) = ds.split(0.25, 0).unwrap();
        let cfg = TrainerConfig {
            method: Method::Rfl,
            alpha: Some(1.0),
            epsilon: Epsilon::Uniform(0.2),
            epochs: 3,
            batch_size: Some(10),
            ..Default::default()
        };
        let m = ModelParams::init(Architecture::mlp(&[2, 5, 2]), Init::UniformFanIn, 0).unwrap();
        let mut rec = train(&cfg, m, &tr, &te).unwrap();
        rec.metadata.insert("label".into(), "rfl".into());
        let dir = tempfile::tempdir().unwrap();
        rec.save(dir.path()).unwrap();

        let back = PersistedRun::load(dir.path()).unwrap();
        assert_eq!(back.config, cfg);
        assert_eq!(back.meta("label"), Some("rfl"));
        assert_eq!(back.train_losses, rec.train_losses);
        assert_eq!(back.test_losses, rec.test_losses);
        assert_eq!(back.multipliers.values(), rec.multipliers.values());
        assert_eq!(back.model, rec.model);
        assert_eq!(&back.last, rec.last());
        assert_eq!(
            std::fs::read_to_string(dir.path().join("status.txt")).unwrap(),
            "completed\n"
        );

        let traj = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
        assert_eq!(traj.lines().count(), 1 + 1 + 3);
        assert!(traj.lines().nth(1).unwrap().starts_with("0,"));
    }
}
