//! Training loops for ERM, feasible learning (FL), its resilient relaxation
//! (RFL) and clamped-and-squared ERM (CSERM).
//!
//! Every method shares one step shape: a forward pass over the batch, a
//! per-sample weight vector, and a single backward pass of the weighted loss.
//! The methods differ only in how the weights are produced:
//!
//! | method | weights                         |
//! |--------|---------------------------------|
//! | erm    | `1/|B|`                          |
//! | fl     | `λ` after a projected ascent step |
//! | rfl    | `λ` after an ascent step with decay `λ/α` |
//! | cserm  | `α[g − ε]₊`                      |

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{batch_order, Batch, Dataset, EpochSeed, Targets};
use crate::error::{Error, Result};
use crate::feasibility::{analytic_dual_opt, violations, ConstraintSpec, Epsilon, MultiplierState, Resilience};
use crate::metrics::ZERO_MULTIPLIER_TOL;
use crate::models::{argmax_rows, loss_output_grad, per_sample_loss, LossKind, ModelParams};
use crate::optim::{OptimizerState, PrimalOptimizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Erm,
    Fl,
    Rfl,
    Cserm,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Erm => "erm",
            Method::Fl => "fl",
            Method::Rfl => "rfl",
            Method::Cserm => "cserm",
        }
    }

    pub fn is_primal_dual(self) -> bool {
        matches!(self, Method::Fl | Method::Rfl)
    }
}

/// How batch multipliers are refreshed before the primal step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DualUpdate {
    /// One projected gradient ascent step.
    #[default]
    Ascent,
    /// Jump to the exact maximizer `α[g − ε]₊` (RFL only). Same as an ascent
    /// step with `η_λ = α`.
    BestResponse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    pub method: Method,
    pub primal_lr: f64,
    pub dual_lr: f64,
    /// Slack price; required for rfl and cserm.
    pub alpha: Option<f64>,
    pub epsilon: Epsilon,
    /// `None` trains full-batch.
    pub batch_size: Option<usize>,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: PrimalOptimizer,
    pub weight_decay: f64,
    /// Cosine decay of the primal step size over the whole run.
    pub cosine_schedule: bool,
    pub dual_update: DualUpdate,
    /// Defaults to squared error for regression and cross-entropy for classification.
    pub loss: Option<LossKind>,
    /// Training aborts once any multiplier exceeds this.
    pub blowup_threshold: f64,
    pub feasibility_tol: f64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            method: Method::Erm,
            primal_lr: 1e-2,
            dual_lr: 1e-2,
            alpha: None,
            epsilon: Epsilon::Uniform(0.0),
            batch_size: None,
            epochs: 1,
            seed: 0,
            optimizer: PrimalOptimizer::Sgd,
            weight_decay: 0.0,
            cosine_schedule: false,
            dual_update: DualUpdate::Ascent,
            loss: None,
            blowup_threshold: 1e12,
            feasibility_tol: 1e-8,
        }
    }
}

impl TrainerConfig {
    pub fn resilience(&self) -> Resilience {
        match (self.method, self.alpha) {
            (Method::Rfl | Method::Cserm, Some(alpha)) => Resilience::Resilient { alpha },
            _ => Resilience::Feasible,
        }
    }

    pub fn loss_kind(&self, dataset: &Dataset) -> LossKind {
        self.loss.unwrap_or_else(|| LossKind::for_task(dataset.task()))
    }

    pub fn validate(&self, dataset: &Dataset) -> Result<()> {
        if !(self.primal_lr > 0.0) {
            return Err(Error::param("primal_lr must be > 0"));
        }
        if self.method.is_primal_dual() && !(self.dual_lr > 0.0) {
            return Err(Error::param("dual_lr must be > 0 for fl and rfl"));
        }
        if matches!(self.method, Method::Rfl | Method::Cserm) {
            match self.alpha {
                Some(a) if a > 0.0 && a.is_finite() => {}
                _ => return Err(Error::param("alpha must be finite and > 0 for rfl and cserm")),
            }
        }
        if self.dual_update == DualUpdate::BestResponse && self.method != Method::Rfl {
            return Err(Error::param("best-response dual updates need method rfl"));
        }
        if let Some(b) = self.batch_size {
            if b == 0 || b > dataset.len() {
                return Err(Error::param(format!("batch_size {b} outside 1..={}", dataset.len())));
            }
        }
        if dataset.is_empty() {
            return Err(Error::param("training set is empty"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::param("weight_decay must be >= 0"));
        }
        self.loss_kind(dataset).check_task(dataset.task())?;
        self.epsilon.expand(dataset.len())?;
        Ok(())
    }

    fn batch_size_for(&self, n: usize) -> usize {
        self.batch_size.unwrap_or(n)
    }
}

/// Model forward and backward passes issued by training steps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassCounts {
    pub forward: u64,
    pub backward: u64,
}

#[derive(Debug, Clone)]
pub struct StepReport {
    /// Batch losses at the parameters the step started from.
    pub losses: Vec<f64>,
    /// Weights the primal gradient used.
    pub weights: Vec<f64>,
}

/// Stateful single-writer trainer. Use [`train`] for whole runs.
#[derive(Debug, Clone)]
pub struct Trainer {
    config: TrainerConfig,
    kind: LossKind,
    model: ModelParams,
    levels: ConstraintSpec,
    multipliers: MultiplierState,
    optimizer: OptimizerState,
    steps: u64,
    total_steps: u64,
    passes: PassCounts,
}

impl Trainer {
    pub fn new(config: &TrainerConfig, model: ModelParams, train: &Dataset) -> Result<Self> {
        config.validate(train)?;
        let n = train.len();
        let per_epoch = n.div_ceil(config.batch_size_for(n)) as u64;
        let optimizer = config.optimizer.state(model.theta().len(), config.weight_decay);
        Ok(Self {
            kind: config.loss_kind(train),
            levels: config.epsilon.expand(n)?,
            multipliers: MultiplierState::zeros(n),
            optimizer,
            steps: 0,
            total_steps: per_epoch * config.epochs as u64,
            passes: PassCounts::default(),
            model,
            config: config.clone(),
        })
    }

    pub fn model(&self) -> &ModelParams {
        &self.model
    }

    pub fn multipliers(&self) -> &MultiplierState {
        &self.multipliers
    }

    pub fn levels(&self) -> &ConstraintSpec {
        &self.levels
    }

    pub fn passes(&self) -> PassCounts {
        self.passes
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn loss_kind(&self) -> LossKind {
        self.kind
    }

    fn primal_lr(&self) -> f64 {
        if self.config.cosine_schedule && self.total_steps > 0 {
            let t = self.steps as f64 / self.total_steps as f64;
            self.config.primal_lr * 0.5 * (1.0 + (PI * t).cos())
        } else {
            self.config.primal_lr
        }
    }

    /// One alternating step on `batch`: losses, dual update of the batch's
    /// multipliers, then a primal step weighted by the updated multipliers.
    pub fn step(&mut self, batch: &Batch) -> Result<StepReport> {
        let pass = self.model.forward_pass(&batch.features)?;
        self.passes.forward += 1;
        let losses = per_sample_loss(self.kind, pass.output(), &batch.targets)?.into_inner();
        let levels = self.levels.select(&batch.ids);
        let weights = match self.config.method {
            Method::Erm => vec![1.0 / batch.len() as f64; batch.len()],
            Method::Cserm => analytic_dual_opt(&losses, &levels, self.config.alpha.unwrap())?,
            Method::Fl | Method::Rfl => {
                let v = violations(&losses, &levels)?;
                let res = self.config.resilience();
                match self.config.dual_update {
                    DualUpdate::Ascent => {
                        self.multipliers
                            .ascend(&batch.ids, &v, self.config.dual_lr, res, self.steps)?;
                    }
                    DualUpdate::BestResponse => {
                        let best = analytic_dual_opt(&losses, &levels, res.alpha())?;
                        self.multipliers.assign(&batch.ids, &best, self.steps);
                    }
                }
                self.check_blowup(&batch.ids)?;
                self.multipliers.select(&batch.ids)
            }
        };
        let dout = loss_output_grad(self.kind, pass.output(), &batch.targets, &weights)?;
        let grad = self.model.backward(&pass, &dout)?;
        self.passes.backward += 1;
        let lr = self.primal_lr();
        self.optimizer.step(self.model.theta_mut(), &grad, lr);
        if let Some(i) = self.model.theta().iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                what: "model parameters",
                sample: Some(i),
            });
        }
        self.steps += 1;
        Ok(StepReport { losses, weights })
    }

    fn check_blowup(&self, ids: &[usize]) -> Result<()> {
        let threshold = self.config.blowup_threshold;
        let over: Vec<usize> = ids
            .iter()
            .copied()
            .filter(|&i| self.multipliers.values()[i] > threshold)
            .collect();
        if over.is_empty() {
            return Ok(());
        }
        let max = over.iter().map(|&i| self.multipliers.values()[i]).fold(0.0, f64::max);
        Err(Error::DualBlowup {
            threshold,
            max,
            ids: over,
        })
    }

    /// Multipliers as reported: the dual state for fl/rfl, the implied
    /// `α[g − ε]₊` for cserm, zeros for erm.
    pub fn reported_multipliers(&self, train_losses: Option<&[f64]>) -> Result<MultiplierState> {
        match (self.config.method, train_losses) {
            (Method::Cserm, Some(g)) => {
                MultiplierState::from_values(analytic_dual_opt(g, self.levels.levels(), self.config.alpha.unwrap())?)
            }
            (Method::Fl | Method::Rfl, _) => Ok(self.multipliers.clone()),
            _ => Ok(MultiplierState::zeros(self.levels.len())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub mean_loss: f64,
    pub max_loss: f64,
    pub accuracy: Option<f64>,
    /// Fraction of samples with `gᵢ ≤ εᵢ + tol`; absent when no levels apply.
    pub satisfied_fraction: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplierSummary {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    pub fraction_zero: f64,
}

impl MultiplierSummary {
    pub fn of(lambda: &[f64]) -> Self {
        if lambda.is_empty() {
            return Self {
                min: 0.0,
                mean: 0.0,
                max: 0.0,
                fraction_zero: 1.0,
            };
        }
        let n = lambda.len() as f64;
        Self {
            min: lambda.iter().cloned().fold(f64::INFINITY, f64::min),
            mean: lambda.iter().sum::<f64>() / n,
            max: lambda.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            fraction_zero: lambda.iter().filter(|&&l| l <= ZERO_MULTIPLIER_TOL).count() as f64 / n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train: SplitMetrics,
    pub test: Option<SplitMetrics>,
    pub multipliers: MultiplierSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Aborted { reason: String },
}

/// Losses and split metrics of a model on one dataset.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub losses: Vec<f64>,
    pub predictions: crate::matrix::Matrix,
    pub metrics: SplitMetrics,
}

pub fn evaluate(
    model: &ModelParams,
    data: &Dataset,
    kind: LossKind,
    levels: Option<&[f64]>,
    tol: f64,
) -> Result<Evaluation> {
    let predictions = model.forward(data.features())?;
    let losses = per_sample_loss(kind, &predictions, data.targets())?.into_inner();
    let n = losses.len().max(1) as f64;
    let accuracy = match data.targets() {
        Targets::Labels(y) => {
            let pred = argmax_rows(&predictions);
            Some(pred.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / n)
        }
        Targets::Real(_) => None,
    };
    let satisfied_fraction = levels.map(|e| losses.iter().zip(e).filter(|(g, e)| **g <= **e + tol).count() as f64 / n);
    let metrics = SplitMetrics {
        mean_loss: losses.iter().sum::<f64>() / n,
        max_loss: losses.iter().cloned().fold(0.0, f64::max),
        accuracy,
        satisfied_fraction,
    };
    Ok(Evaluation {
        losses,
        predictions,
        metrics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub satisfied_count: usize,
    pub max_violation: f64,
    pub violating_ids: Vec<usize>,
}

impl FeasibilityReport {
    pub fn from_losses(losses: &[f64], levels: &[f64], tol: f64) -> Result<Self> {
        let v = violations(losses, levels)?;
        let violating_ids: Vec<usize> = v.iter().enumerate().filter(|(_, &x)| x > tol).map(|(i, _)| i).collect();
        Ok(Self {
            satisfied_count: v.len() - violating_ids.len(),
            max_violation: v.iter().cloned().fold(0.0, f64::max),
            violating_ids,
        })
    }

    pub fn is_feasible(&self) -> bool {
        self.violating_ids.is_empty()
    }
}

/// Which samples violate `gᵢ ≤ εᵢ + tol` under `model`.
pub fn feasibility_report(
    model: &ModelParams,
    dataset: &Dataset,
    spec: &ConstraintSpec,
    kind: LossKind,
    tol: f64,
) -> Result<FeasibilityReport> {
    let eval = evaluate(model, dataset, kind, None, tol)?;
    FeasibilityReport::from_losses(&eval.losses, spec.levels(), tol)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: TrainerConfig,
    /// Metrics before the first step (epoch 0).
    pub initial: EpochMetrics,
    /// One entry per completed epoch.
    pub trajectory: Vec<EpochMetrics>,
    pub train_losses: Vec<f64>,
    pub test_losses: Vec<f64>,
    pub multipliers: MultiplierState,
    pub model: ModelParams,
    pub wall_clock_secs: f64,
    pub status: RunStatus,
    pub passes: PassCounts,
    pub metadata: BTreeMap<String, String>,
}

impl RunRecord {
    pub fn is_completed(&self) -> bool {
        self.status == RunStatus::Completed
    }

    /// Metrics after the last completed epoch, or the initial state.
    pub fn last(&self) -> &EpochMetrics {
        self.trajectory.last().unwrap_or(&self.initial)
    }
}

struct EpochEval {
    metrics: EpochMetrics,
    train_losses: Vec<f64>,
    test_losses: Vec<f64>,
    multipliers: MultiplierState,
}

fn epoch_eval(
    trainer: &Trainer,
    train: &Dataset,
    test: &Dataset,
    test_levels: Option<&[f64]>,
    epoch: usize,
) -> Result<EpochEval> {
    let tol = trainer.config.feasibility_tol;
    let tr = evaluate(&trainer.model, train, trainer.kind, Some(trainer.levels.levels()), tol)?;
    let te = if test.is_empty() {
        None
    } else {
        Some(evaluate(&trainer.model, test, trainer.kind, test_levels, tol)?)
    };
    let multipliers = trainer.reported_multipliers(Some(&tr.losses))?;
    Ok(EpochEval {
        metrics: EpochMetrics {
            epoch,
            train: tr.metrics,
            test: te.as_ref().map(|e| e.metrics),
            multipliers: MultiplierSummary::of(multipliers.values()),
        },
        train_losses: tr.losses,
        test_losses: te.map(|e| e.losses).unwrap_or_default(),
        multipliers,
    })
}

/// Runs the full epoch budget. Divergence (non-finite values or multipliers
/// past the blow-up threshold) yields an aborted record rather than an error;
/// invalid configurations are errors.
pub fn train(config: &TrainerConfig, model: ModelParams, train: &Dataset, test: &Dataset) -> Result<RunRecord> {
    let start = Instant::now();
    let mut trainer = Trainer::new(config, model, train)?;
    if !test.is_empty() {
        trainer.kind.check_task(test.task())?;
    }
    let test_levels = match &config.epsilon {
        Epsilon::Uniform(e) => Some(vec![*e; test.len()]),
        Epsilon::PerSample(_) => None,
    };
    let initial = epoch_eval(&trainer, train, test, test_levels.as_deref(), 0)?;
    let mut last = initial.metrics.clone();
    let mut last_losses = (initial.train_losses, initial.test_losses);
    let mut last_multipliers = initial.multipliers;
    let mut trajectory = Vec::with_capacity(config.epochs);
    let mut status = RunStatus::Completed;
    let n = train.len();

    'epochs: for epoch in 0..config.epochs {
        let seed = EpochSeed {
            run_seed: config.seed,
            epoch: epoch as u64,
        };
        for ids in batch_order(n, config.batch_size_for(n), seed)? {
            let batch = if ids.len() == n && config.batch_size.is_none() {
                train.full_batch()
            } else {
                train.batch(&ids)
            };
            match trainer.step(&batch) {
                Ok(_) => {}
                Err(e @ (Error::Numeric { .. } | Error::DualBlowup { .. })) => {
                    status = RunStatus::Aborted {
                        reason: format!("epoch {}: {e}", epoch + 1),
                    };
                    last_multipliers = trainer.multipliers.clone();
                    break 'epochs;
                }
                Err(e) => return Err(e),
            }
        }
        match epoch_eval(&trainer, train, test, test_levels.as_deref(), epoch + 1) {
            Ok(ev) => {
                last = ev.metrics.clone();
                trajectory.push(ev.metrics);
                last_losses = (ev.train_losses, ev.test_losses);
                last_multipliers = ev.multipliers;
            }
            Err(e @ Error::Numeric { .. }) => {
                status = RunStatus::Aborted {
                    reason: format!("epoch {}: {e}", epoch + 1),
                };
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let _ = last;

    let mut metadata = BTreeMap::new();
    metadata.insert("optimizer".into(), format!("{:?}", config.optimizer));
    metadata.insert("loss".into(), format!("{:?}", trainer.kind));
    metadata.insert("architecture".into(), trainer.model.architecture().to_string());

    Ok(RunRecord {
        config: config.clone(),
        initial: initial.metrics,
        trajectory,
        train_losses: last_losses.0,
        test_losses: last_losses.1,
        multipliers: last_multipliers,
        model: trainer.model.clone(),
        wall_clock_secs: start.elapsed().as_secs_f64(),
        status,
        passes: trainer.passes,
        metadata,
    })
}
