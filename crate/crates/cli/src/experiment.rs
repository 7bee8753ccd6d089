//! `run`: train every seed of an experiment and aggregate the results.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use feasible_core::metrics::{cvar, multiplier_stats};
use feasible_core::trainer::{train, RunRecord};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub n: usize,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self {
            mean,
            std: var.sqrt(),
            n: values.len(),
        })
    }
}

impl std::fmt::Display for Aggregate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.4} ± {:.4}", self.mean, self.std)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub dir: PathBuf,
    pub completed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub top_multiplier_ids: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub label: String,
    pub dataset_signature: String,
    pub runs: Vec<SeedOutcome>,
    /// Final metrics over completed seeds.
    pub metrics: BTreeMap<String, Aggregate>,
}

/// Scalar metrics of one finished run, keyed by name.
pub fn run_metrics(rec: &RunRecord, quantiles: &[f64]) -> Result<BTreeMap<String, f64>> {
    let mut m = BTreeMap::new();
    let last = rec.last();
    let mut split = |name: &str, s: &feasible_core::trainer::SplitMetrics, losses: &[f64]| -> Result<()> {
        m.insert(format!("{name}_mean_loss"), s.mean_loss);
        m.insert(format!("{name}_max_loss"), s.max_loss);
        if let Some(a) = s.accuracy {
            m.insert(format!("{name}_accuracy"), a);
        }
        if let Some(f) = s.satisfied_fraction {
            m.insert(format!("{name}_satisfied_fraction"), f);
        }
        if !losses.is_empty() {
            for &q in quantiles {
                m.insert(format!("{name}_cvar_{q}"), cvar(losses, q)?);
            }
        }
        Ok(())
    };
    split("train", &last.train, &rec.train_losses)?;
    if let Some(t) = &last.test {
        split("test", t, &rec.test_losses)?;
    }
    m.insert("lambda_fraction_zero".into(), last.multipliers.fraction_zero);
    m.insert("lambda_max".into(), last.multipliers.max);
    m.insert("wall_clock_secs".into(), rec.wall_clock_secs);
    Ok(m)
}

/// Runs all seeds, writing `<output>/seed_<s>/` per run and `<output>/summary.json`.
/// Aborted runs keep their artifacts and make the call fail with
/// [`CliError::Aborted`] after everything is written.
pub fn run_experiment(cfg: &ExperimentConfig, base: &Path) -> Result<Summary> {
    let (train_set, test_set) = cfg.datasets(base)?;
    cfg.trainer
        .validate(&train_set)
        .map_err(|e| CliError::Config(format!("trainer: {e}")))?;
    let arch = &cfg.model.architecture;
    if arch.input_dim() != train_set.dim() {
        return Err(CliError::Config(format!(
            "model takes {} inputs but the data has {} features",
            arch.input_dim(),
            train_set.dim()
        )));
    }
    let out = cfg.resolved_output_dir();
    std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let config_path = out.join("experiment.toml");
    std::fs::write(&config_path, cfg.to_toml()).map_err(|e| CliError::io(&config_path, e))?;

    let label = cfg.label();
    let signature = train_set.signature();
    let mut runs = Vec::new();
    let mut per_metric: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for &seed in &cfg.seeds {
        let trainer = feasible_core::TrainerConfig {
            seed,
            ..cfg.trainer.clone()
        };
        let mut rec = train(&trainer, cfg.model(seed)?, &train_set, &test_set)?;
        rec.metadata.insert("label".into(), label.clone());
        rec.metadata.insert("seed".into(), seed.to_string());
        rec.metadata.insert("dataset_signature".into(), signature.clone());
        rec.metadata.insert("test_signature".into(), test_set.signature());
        rec.metadata.insert("init".into(), format!("{:?}", cfg.model.init));
        let dir = out.join(format!("seed_{seed}"));
        rec.save(&dir)?;

        let top = multiplier_stats(rec.multipliers.values(), cfg.metrics.top_k.min(rec.multipliers.len()))?.top_k_ids;
        let reason = match &rec.status {
            feasible_core::RunStatus::Completed => {
                for (k, v) in run_metrics(&rec, &cfg.metrics.quantiles)? {
                    per_metric.entry(k).or_default().push(v);
                }
                None
            }
            feasible_core::RunStatus::Aborted { reason } => Some(reason.clone()),
        };
        runs.push(SeedOutcome {
            seed,
            dir,
            completed: reason.is_none(),
            reason,
            top_multiplier_ids: top,
        });
    }
    let summary = Summary {
        label,
        dataset_signature: signature,
        metrics: per_metric
            .into_iter()
            .filter_map(|(k, v)| Aggregate::of(&v).map(|a| (k, a)))
            .collect(),
        runs,
    };
    let path = out.join("summary.json");
    let json = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Input(e.to_string()))?;
    std::fs::write(&path, json).map_err(|e| CliError::io(&path, e))?;
    let aborted = summary.runs.iter().filter(|r| !r.completed).count();
    if aborted > 0 {
        return Err(CliError::Aborted {
            aborted,
            total: summary.runs.len(),
        });
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_std() {
        let a = Aggregate::of(&[1.0, 3.0]).unwrap();
        assert_eq!((a.mean, a.std, a.n), (2.0, 1.0, 2));
        assert!(Aggregate::of(&[]).is_none());
    }
}
