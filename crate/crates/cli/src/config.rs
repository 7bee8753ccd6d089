//! Experiment configuration files (TOML).

use std::path::{Path, PathBuf};

use feasible_core::data::{
    gen_conflicting_pairs, gen_noisy_cosine, gen_outlier_regression, gen_two_moons, OutlierRegression,
};
use feasible_core::{Architecture, Dataset, Init, ModelParams, TrainerConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Prefix for relative `output_dir` values when set.
pub const OUTPUT_ROOT_ENV: &str = "FEASIBLE_OUTPUT_ROOT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Label used in reports; defaults to the trainer method.
    #[serde(default)]
    pub name: Option<String>,
    pub data: DataSpec,
    pub model: ModelSpec,
    pub trainer: TrainerConfig,
    #[serde(default)]
    pub metrics: MetricsSpec,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum DataSource {
    TwoMoons {
        n: usize,
        #[serde(default = "default_moons_noise")]
        noise: f64,
    },
    NoisyCosine {
        n: usize,
        sigma: f64,
    },
    ConflictingPairs {
        n_pairs: usize,
        d: usize,
        label_gap: f64,
    },
    OutlierRegression {
        n: usize,
        #[serde(default = "default_outlier_d")]
        d: usize,
        #[serde(default = "default_outlier_noise")]
        noise: f64,
        #[serde(default = "default_outlier_fraction")]
        outlier_fraction: f64,
        #[serde(default = "default_outlier_shift")]
        shift: f64,
    },
    Csv {
        path: PathBuf,
        #[serde(default)]
        classification: bool,
        /// Optional separate test file.
        #[serde(default)]
        test_path: Option<PathBuf>,
    },
}

fn default_moons_noise() -> f64 {
    0.1
}
fn default_outlier_d() -> usize {
    OutlierRegression::default().d
}
fn default_outlier_noise() -> f64 {
    OutlierRegression::default().noise
}
fn default_outlier_fraction() -> f64 {
    OutlierRegression::default().outlier_fraction
}
fn default_outlier_shift() -> f64 {
    OutlierRegression::default().shift
}

/// Dataset source plus how the test split is formed.
///
/// Generators draw the test set independently (`test_n` samples, seed
/// `test_seed`, default `seed + 1`). Alternatively `test_fraction` holds out a
/// random part of the training draw. With neither, there is no test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSpec {
    #[serde(flatten)]
    pub source: DataSource,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub test_n: Option<usize>,
    #[serde(default)]
    pub test_seed: Option<u64>,
    #[serde(default)]
    pub test_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub architecture: Architecture,
    #[serde(default)]
    pub init: InitSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitSpec {
    Zeros,
    #[default]
    UniformFanIn,
}

impl From<InitSpec> for Init {
    fn from(s: InitSpec) -> Self {
        match s {
            InitSpec::Zeros => Init::Zeros,
            InitSpec::UniformFanIn => Init::UniformFanIn,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSpec {
    #[serde(default = "default_quantiles")]
    pub quantiles: Vec<f64>,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
}

fn default_quantiles() -> Vec<f64> {
    vec![0.5, 0.9, 0.95, 0.99]
}

fn default_top_k() -> usize {
    10
}

impl Default for MetricsSpec {
    fn default() -> Self {
        Self {
            quantiles: default_quantiles(),
            top_k: default_top_k(),
        }
    }
}

pub fn check_quantiles(qs: &[f64]) -> Result<()> {
    match qs.iter().find(|q| !(0.0..1.0).contains(*q)) {
        Some(q) => Err(CliError::Config(format!("quantile {q} outside [0, 1)"))),
        None => Ok(()),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        let has_method = table
            .get("trainer")
            .and_then(|t| t.as_table())
            .is_some_and(|t| t.contains_key("method"));
        if !has_method {
            return Err(CliError::Config("missing trainer.method".into()));
        }
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    fn check(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(CliError::Config("seeds must not be empty".into()));
        }
        check_quantiles(&self.metrics.quantiles)?;
        if let Some(f) = self.data.test_fraction {
            if !(0.0..1.0).contains(&f) {
                return Err(CliError::Config(format!("test_fraction {f} outside [0, 1)")));
            }
            if self.data.test_n.is_some() {
                return Err(CliError::Config("set at most one of test_n and test_fraction".into()));
            }
        }
        self.model
            .architecture
            .validate()
            .map_err(|e| CliError::Config(format!("model: {e}")))
    }

    pub fn label(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| self.trainer.method.name().to_string())
    }

    /// Output directory after applying the environment override.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if self.output_dir.is_relative() => PathBuf::from(root).join(&self.output_dir),
            _ => self.output_dir.clone(),
        }
    }

    /// Train and test sets; identical for every run seed.
    pub fn datasets(&self, base: &Path) -> Result<(Dataset, Dataset)> {
        let d = &self.data;
        let draw = |n: usize, seed: u64| -> feasible_core::Result<Dataset> {
            match &d.source {
                DataSource::TwoMoons { noise, .. } => gen_two_moons(n, *noise, seed),
                DataSource::NoisyCosine { sigma, .. } => gen_noisy_cosine(n, *sigma, seed),
                DataSource::ConflictingPairs { d, label_gap, .. } => gen_conflicting_pairs(n, *d, *label_gap, seed),
                DataSource::OutlierRegression {
                    d,
                    noise,
                    outlier_fraction,
                    shift,
                    ..
                } => {
                    let p = OutlierRegression {
                        n,
                        d: *d,
                        noise: *noise,
                        outlier_fraction: *outlier_fraction,
                        shift: *shift,
                        task_seed: self.data.seed,
                    };
                    gen_outlier_regression(&p, seed)
                }
                DataSource::Csv { .. } => unreachable!(),
            }
        };
        let config_err = |e: feasible_core::Error| CliError::Config(format!("data: {e}"));
        let full = match &d.source {
            DataSource::TwoMoons { n, .. }
            | DataSource::NoisyCosine { n, .. }
            | DataSource::OutlierRegression { n, .. }
            | DataSource::ConflictingPairs { n_pairs: n, .. } => draw(*n, d.seed).map_err(config_err)?,
            DataSource::Csv {
                path, classification, ..
            } => Dataset::read_csv(base.join(path), *classification)?,
        };
        if let Some(f) = d.test_fraction {
            return Ok(full.split(f, d.seed)?);
        }
        let test = match (&d.source, d.test_n) {
            (
                DataSource::Csv {
                    test_path: Some(p),
                    classification,
                    ..
                },
                _,
            ) => Dataset::read_csv(base.join(p), *classification)?,
            (DataSource::Csv { .. }, Some(_)) => {
                return Err(CliError::Config(
                    "test_n needs a generator; use test_fraction or test_path".into(),
                ))
            }
            (_, Some(n)) => draw(n, d.test_seed.unwrap_or(d.seed + 1)).map_err(config_err)?,
            (_, None) => full.subset(&[])?,
        };
        Ok((full, test))
    }

    pub fn model(&self, seed: u64) -> Result<ModelParams> {
        Ok(ModelParams::init(
            self.model.architecture.clone(),
            self.model.init.into(),
            seed,
        )?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[data]
generator = "two_moons"
n = 20

[model]
kind = "mlp"
layers = [2, 4, 2]
activation = "relu"

[trainer]
method = "fl"
"#;

    #[test]
    fn defaults_fill_everything_but_data_and_method() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.seeds, vec![0]);
        assert_eq!(c.metrics, MetricsSpec::default());
        assert_eq!(c.label(), "fl");
        let (tr, te) = c.datasets(Path::new(".")).unwrap();
        assert_eq!((tr.len(), te.len()), (20, 0));
    }

    #[test]
    fn diagnostics_carry_line_numbers() {
        let bad = MINIMAL.replace("n = 20", "n = \"twenty\"");
        let CliError::Config(msg) = ExperimentConfig::parse(&bad).unwrap_err() else {
            panic!()
        };
        assert!(msg.contains("line"), "{msg}");
    }

    #[test]
    fn rejects_invalid_values() {
        for (from, to) in [
            ("method = \"fl\"", "method = \"sgd\""),
            ("n = 20", "n = 20\ntest_fraction = 1.5"),
            ("[data]", "seeds = []\n[data]"),
            ("layers = [2, 4, 2]", "layers = [2]"),
        ] {
            let text = MINIMAL.replace(from, to);
            assert!(ExperimentConfig::parse(&text).is_err(), "{to}");
        }
        let text = format!("{MINIMAL}\n[metrics]\nquantiles = [0.5, 1.0]\n");
        assert!(ExperimentConfig::parse(&text).is_err());
    }

    #[test]
    fn independent_test_draw() {
        let text = MINIMAL.replace("n = 20", "n = 20\ntest_n = 10");
        let c = ExperimentConfig::parse(&text).unwrap();
        let (tr, te) = c.datasets(Path::new(".")).unwrap();
        assert_eq!(te.len(), 10);
        assert_ne!(tr.signature(), te.signature());
    }

    #[test]
    fn toml_round_trip() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(ExperimentConfig::parse(&c.to_toml()).unwrap(), c);
    }
}
