//! Independent checks for the trainer's building blocks: finite-difference
//! gradients, the two duality identities, and exhaustive feasibility search
//! for tiny model families.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Basis, Dataset, Targets, Task};
use crate::error::{Error, Result};
use crate::feasibility::{
    analytic_dual_opt, cserm_objective, lagrangian_alpha, lagrangian_rfl, violations, ConstraintSpec,
};
use crate::matrix::Matrix;
use crate::models::{per_sample_loss, weighted_loss_grad, Activation, Architecture, Init, LossKind, ModelParams};

pub const DEFAULT_FD_STEP: f64 = 1e-6;

/// Central differences `(f(θ + h eᵢ) − f(θ − h eᵢ)) / 2h`.
pub fn finite_diff_grad<F: FnMut(&[f64]) -> f64>(mut f: F, theta: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::param(format!("finite-difference step must be > 0, got {h}")));
    }
    let mut probe = theta.to_vec();
    let mut grad = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        probe[i] = theta[i] + h;
        let up = f(&probe);
        probe[i] = theta[i] - h;
        let down = f(&probe);
        probe[i] = theta[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::Numeric {
                what: "finite-difference objective",
                sample: Some(i),
            });
        }
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// Model families the randomized checks draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Linear,
    Polynomial,
    MlpTanh,
    MlpRelu,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 4] = [
        ModelFamily::Linear,
        ModelFamily::Polynomial,
        ModelFamily::MlpTanh,
        ModelFamily::MlpRelu,
    ];

    /// A random model, a small dataset it applies to, and its loss.
    pub fn sample(self, rng: &mut ChaCha8Rng) -> Result<(ModelParams, Dataset, LossKind)> {
        let n = rng.random_range(1..=12);
        let seed: u64 = rng.random();
        match self {
            ModelFamily::Linear => {
                let d = rng.random_range(1..=4);
                let x = uniform_matrix(rng, n, d);
                let y = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                let arch = Architecture::Linear { inputs: d, outputs: 1 };
                let model = ModelParams::init(arch, Init::UniformFanIn, seed)?;
                Ok((
                    model,
                    Dataset::new(x, Targets::Real(y), Task::Regression)?,
                    LossKind::SquaredError,
                ))
            }
            ModelFamily::Polynomial => {
                let degree = rng.random_range(0..=8);
                let x = uniform_matrix(rng, n, 1);
                let y = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                let arch = Architecture::Polynomial {
                    degree,
                    basis: Basis::Chebyshev,
                    domain: (-1.0, 1.0),
                };
                let theta = (0..=degree)
                    .map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let model = ModelParams::new(arch, theta)?;
                Ok((
                    model,
                    Dataset::new(x, Targets::Real(y), Task::Regression)?,
                    LossKind::SquaredError,
                ))
            }
            ModelFamily::MlpTanh | ModelFamily::MlpRelu => {
                let d = rng.random_range(1..=3);
                let classes = rng.random_range(2..=3);
                let hidden = rng.random_range(2..=6);
                let activation = if self == ModelFamily::MlpTanh {
                    Activation::Tanh
                } else {
                    Activation::Relu
                };
                let x = uniform_matrix(rng, n, d);
                let y = (0..n).map(|_| rng.random_range(0..classes)).collect();
                let arch = Architecture::Mlp {
                    layers: vec![d, hidden, hidden, classes],
                    activation,
                };
                let model = ModelParams::init(arch, Init::UniformFanIn, seed)?;
                let ds = Dataset::new(x, Targets::Labels(y), Task::Classification { classes })?;
                Ok((model, ds, LossKind::CrossEntropy))
            }
        }
    }
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Matrix::from_vec(rows, cols, data).expect("sized by construction")
}

fn losses_of(model: &ModelParams, ds: &Dataset, kind: LossKind) -> Result<Vec<f64>> {
    Ok(per_sample_loss(kind, &model.forward(ds.features())?, ds.targets())?.into_inner())
}

/// Random levels straddling the losses so that both active and inactive
/// constraints occur.
fn random_levels(rng: &mut ChaCha8Rng, g: &[f64]) -> Vec<f64> {
    let top = g.iter().cloned().fold(0.0, f64::max).max(1e-3);
    if rng.random_bool(0.5) {
        vec![rng.random_range(0.0..1.2 * top); g.len()]
    } else {
        g.iter().map(|_| rng.random_range(0.0..1.2 * top)).collect()
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop2Failure {
    pub trial: usize,
    pub losses: Vec<f64>,
    pub levels: Vec<f64>,
    pub alpha: f64,
    pub lagrangian: f64,
    pub cserm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop2Report {
    pub family: ModelFamily,
    pub trials: usize,
    pub tol: f64,
    pub max_discrepancy: f64,
    pub failures: Vec<Prop2Failure>,
}

impl Prop2Report {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// The regularized Lagrangian at its analytic dual optimum equals the
/// clamped-and-squared objective.
pub fn prop2_discrepancy(g: &[f64], eps: &[f64], alpha: f64) -> Result<(f64, f64)> {
    let lambda = analytic_dual_opt(g, eps, alpha)?;
    Ok((
        lagrangian_alpha(g, eps, &lambda, alpha)?,
        cserm_objective(g, eps, alpha)?,
    ))
}

pub fn check_prop2(family: ModelFamily, n_trials: usize, tol: f64, seed: u64) -> Result<Prop2Report> {
    if !(tol > 0.0) {
        return Err(Error::param("tolerance must be > 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = Prop2Report {
        family,
        trials: n_trials,
        tol,
        max_discrepancy: 0.0,
        failures: Vec::new(),
    };
    for trial in 0..n_trials {
        let (model, ds, kind) = family.sample(&mut rng)?;
        let g = losses_of(&model, &ds, kind)?;
        let eps = random_levels(&mut rng, &g);
        let alpha = log_uniform(&mut rng, 1e-2, 1e2);
        let (lag, cs) = prop2_discrepancy(&g, &eps, alpha)?;
        let gap = (lag - cs).abs();
        report.max_discrepancy = report.max_discrepancy.max(gap);
        if !(gap <= tol) {
            report.failures.push(Prop2Failure {
                trial,
                losses: g,
                levels: eps,
                alpha,
                lagrangian: lag,
                cserm: cs,
            });
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop1Report {
    pub alpha: f64,
    pub perturbations: usize,
    pub tol: f64,
    /// Inner minimum at `u = λ/α`.
    pub inner_value: f64,
    /// Most negative `L(u') − L(u*)` seen; should be `≥ −tol`.
    pub worst_improvement: f64,
    /// `|min_u L(u, λ) − L_α(λ)|`.
    pub substitution_gap: f64,
    /// `|max_λ min_u − min_u max_λ|` at the analytic saddle.
    pub saddle_gap: f64,
}

impl Prop1Report {
    pub fn passed(&self) -> bool {
        self.worst_improvement >= -self.tol && self.substitution_gap <= self.tol && self.saddle_gap <= self.tol
    }
}

/// Checks that `u* = λ/α` solves the inner slack problem of the resilient
/// Lagrangian and that min-max and max-min agree at the analytic saddle.
pub fn check_prop1_inner(
    g: &[f64],
    eps: &[f64],
    lambda: &[f64],
    alpha: f64,
    n_perturbations: usize,
    tol: f64,
    seed: u64,
) -> Result<Prop1Report> {
    if !(alpha > 0.0) {
        return Err(Error::param("alpha must be > 0"));
    }
    if lambda.iter().any(|l| !(*l >= 0.0)) {
        return Err(Error::param("multipliers must be >= 0"));
    }
    let u_star: Vec<f64> = lambda.iter().map(|l| l / alpha).collect();
    let inner_value = lagrangian_rfl(g, eps, &u_star, lambda, alpha)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    let scale = u_star.iter().cloned().fold(1.0, f64::max);
    for k in 0..n_perturbations {
        // Alternate single-coordinate grid moves and random points of the orthant.
        let u: Vec<f64> = if k % 2 == 0 && !g.is_empty() {
            let mut u = u_star.clone();
            let i = (k / 2) % g.len();
            let step = (k / 2 / g.len()) as f64 + 1.0;
            let delta = if (k / 2) % 4 < 2 { 0.01 * step } else { -0.01 * step };
            u[i] = (u[i] + delta * scale).max(0.0);
            u
        } else {
            u_star
                .iter()
                .map(|&x| (x + scale * rng.random_range(-1.0..1.0)).max(0.0))
                .collect()
        };
        let value = lagrangian_rfl(g, eps, &u, lambda, alpha)?;
        worst = worst.min(value - inner_value);
    }
    if n_perturbations == 0 {
        worst = 0.0;
    }
    let substitution_gap = (inner_value - lagrangian_alpha(g, eps, lambda, alpha)?).abs();

    // max over λ of the substituted dual is attained at α[g − ε]₊; min over
    // u ≥ 0 of max over λ forces u ≥ g − ε, so it is attained at [g − ε]₊.
    let lambda_star = analytic_dual_opt(g, eps, alpha)?;
    let max_min = lagrangian_alpha(g, eps, &lambda_star, alpha)?;
    let u_plus: Vec<f64> = violations(g, eps)?.into_iter().map(|v| v.max(0.0)).collect();
    let min_max = 0.5 * alpha * u_plus.iter().map(|u| u * u).sum::<f64>();
    Ok(Prop1Report {
        alpha,
        perturbations: n_perturbations,
        tol,
        inner_value,
        worst_improvement: worst,
        substitution_gap,
        saddle_gap: (max_min - min_max).abs(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop1Suite {
    pub trials: usize,
    pub failures: Vec<(usize, Prop1Report)>,
    pub worst_improvement: f64,
    pub max_gap: f64,
}

impl Prop1Suite {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs [`check_prop1_inner`] on random `(g, ε, λ, α)`.
pub fn check_prop1_random(n_trials: usize, n_perturbations: usize, tol: f64, seed: u64) -> Result<Prop1Suite> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut suite = Prop1Suite {
        trials: n_trials,
        failures: Vec::new(),
        worst_improvement: f64::INFINITY,
        max_gap: 0.0,
    };
    for trial in 0..n_trials {
        let n = rng.random_range(1..=20);
        let g: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
        let eps = random_levels(&mut rng, &g);
        let alpha = log_uniform(&mut rng, 1e-2, 1e2);
        let lambda: Vec<f64> = (0..n)
            .map(|_| {
                if rng.random_bool(0.3) {
                    0.0
                } else {
                    rng.random_range(0.0..5.0)
                }
            })
            .collect();
        let r = check_prop1_inner(&g, &eps, &lambda, alpha, n_perturbations, tol, rng.random())?;
        suite.worst_improvement = suite.worst_improvement.min(r.worst_improvement);
        suite.max_gap = suite.max_gap.max(r.substitution_gap).max(r.saddle_gap);
        if !r.passed() {
            suite.failures.push((trial, r));
        }
    }
    Ok(suite)
}

/// Which analytic gradient a check compares against finite differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientTarget {
    /// `Σ wᵢ ∇gᵢ` for random nonnegative weights.
    WeightedLoss,
    /// `∇ (α/2)‖[g − ε]₊‖²`, computed as the weighted gradient with weights `α[g − ε]₊`.
    Cserm,
}

/// Deliberate corruption of the analytic gradient, for testing the checker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientFault {
    pub coordinate: usize,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientMismatch {
    pub family: ModelFamily,
    pub target: GradientTarget,
    pub draw: usize,
    pub coordinate: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientReport {
    pub draws: usize,
    pub tol: f64,
    /// Largest relative error over every coordinate of every draw.
    pub worst: Option<GradientMismatch>,
}

impl GradientReport {
    pub fn passed(&self) -> bool {
        self.worst.as_ref().is_none_or(|w| w.rel_error < self.tol)
    }
}

/// Components smaller than this are compared in absolute terms.
pub const REL_ERROR_FLOOR: f64 = 1e-4;

pub fn rel_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_ERROR_FLOOR)
}

/// Scalar objective of the per-sample losses.
type Objective = Box<dyn Fn(&[f64]) -> f64>;

pub fn check_gradients(
    family: ModelFamily,
    target: GradientTarget,
    draws: usize,
    tol: f64,
    seed: u64,
    fault: Option<GradientFault>,
) -> Result<GradientReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: Option<GradientMismatch> = None;
    for draw in 0..draws {
        let (model, ds, kind) = family.sample(&mut rng)?;
        let batch = ds.full_batch();
        let g = losses_of(&model, &ds, kind)?;
        let (weights, objective): (Vec<f64>, Objective) = match target {
            GradientTarget::WeightedLoss => {
                let w: Vec<f64> = (0..ds.len()).map(|_| rng.random_range(0.0..2.0)).collect();
                let wc = w.clone();
                (
                    w,
                    Box::new(move |g: &[f64]| g.iter().zip(&wc).map(|(a, b)| a * b).sum()),
                )
            }
            GradientTarget::Cserm => {
                let eps = random_levels(&mut rng, &g);
                let alpha = log_uniform(&mut rng, 0.1, 10.0);
                let w = analytic_dual_opt(&g, &eps, alpha)?;
                (
                    w,
                    Box::new(move |g: &[f64]| cserm_objective(g, &eps, alpha).unwrap_or(f64::NAN)),
                )
            }
        };
        let mut analytic = weighted_loss_grad(&model, &batch, kind, &weights)?;
        if let Some(f) = fault {
            if let Some(a) = analytic.get_mut(f.coordinate) {
                *a += f.delta;
            }
        }
        let numeric = finite_diff_grad(
            |theta| match model.with_theta(theta).and_then(|m| losses_of(&m, &ds, kind)) {
                Ok(g) => objective(&g),
                Err(_) => f64::NAN,
            },
            model.theta(),
            DEFAULT_FD_STEP,
        )?;
        for (i, (&a, &n)) in analytic.iter().zip(&numeric).enumerate() {
            let e = rel_error(a, n);
            if worst.as_ref().is_none_or(|w| e > w.rel_error) {
                worst = Some(GradientMismatch {
                    family,
                    target,
                    draw,
                    coordinate: i,
                    analytic: a,
                    numeric: n,
                    rel_error: e,
                });
            }
        }
    }
    Ok(GradientReport { draws, tol, worst })
}

/// Tiny regression model families for exhaustive feasibility search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SearchFamily {
    /// `f(x) = c`.
    Constant,
    /// `f(x) = w·x₀ + b` with `w` scanned over `points` values in `[lo, hi]`.
    Affine { lo: f64, hi: f64, points: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilitySearch {
    pub feasible: bool,
    /// Witness when feasible, otherwise the parameters minimizing the max violation.
    pub theta: Vec<f64>,
    /// Smallest max violation found; positive values certify infeasibility
    /// within the family (up to the slope grid for the affine family).
    pub max_violation: f64,
}

/// Exhaustive search for parameters meeting every squared-error constraint.
///
/// The intercept is optimized exactly for each candidate slope: the feasible
/// intercepts form an intersection of intervals, and the minimax violation is
/// a convex function of the intercept.
pub fn brute_force_feasible(
    dataset: &Dataset,
    spec: &ConstraintSpec,
    family: SearchFamily,
    tol: f64,
) -> Result<FeasibilitySearch> {
    let Targets::Real(y) = dataset.targets() else {
        return Err(Error::param("feasibility search needs a regression dataset"));
    };
    if spec.len() != dataset.len() {
        return Err(Error::Shape {
            context: "constraint levels",
            expected: dataset.len(),
            got: spec.len(),
        });
    }
    let eps = spec.levels();
    let slopes: Vec<f64> = match family {
        SearchFamily::Constant => vec![0.0],
        SearchFamily::Affine { lo, hi, points } => {
            if points < 1 || !(hi >= lo) {
                return Err(Error::param("slope grid needs points >= 1 and hi >= lo"));
            }
            if points == 1 {
                vec![lo]
            } else {
                (0..points)
                    .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
                    .collect()
            }
        }
    };
    let x0: Vec<f64> = if dataset.dim() > 0 {
        dataset.features().column(0)
    } else {
        vec![0.0; dataset.len()]
    };
    let mut best: Option<FeasibilitySearch> = None;
    for &w in &slopes {
        let r: Vec<f64> = y.iter().zip(&x0).map(|(yi, xi)| yi - w * xi).collect();
        let (b, v) = best_intercept(&r, eps, tol);
        let theta = match family {
            SearchFamily::Constant => vec![b],
            SearchFamily::Affine { .. } => vec![w, b],
        };
        let cand = FeasibilitySearch {
            feasible: v <= tol,
            theta,
            max_violation: v,
        };
        if best.as_ref().is_none_or(|c| cand.max_violation < c.max_violation) {
            let done = cand.feasible;
            best = Some(cand);
            if done {
                break;
            }
        }
    }
    Ok(best.unwrap_or(FeasibilitySearch {
        feasible: true,
        theta: Vec::new(),
        max_violation: 0.0,
    }))
}

/// Intercept minimizing `maxᵢ [(b − rᵢ)² − εᵢ]₊` and that minimum.
fn best_intercept(r: &[f64], eps: &[f64], tol: f64) -> (f64, f64) {
    if r.is_empty() {
        return (0.0, 0.0);
    }
    let worst = |b: f64| {
        r.iter()
            .zip(eps)
            .map(|(ri, e)| (b - ri).powi(2) - e)
            .fold(0.0, f64::max)
    };
    let lo = r
        .iter()
        .zip(eps)
        .map(|(ri, e)| ri - (e + tol).sqrt())
        .fold(f64::NEG_INFINITY, f64::max);
    let hi = r
        .iter()
        .zip(eps)
        .map(|(ri, e)| ri + (e + tol).sqrt())
        .fold(f64::INFINITY, f64::min);
    if lo <= hi {
        let b = 0.5 * (lo + hi);
        return (b, worst(b));
    }
    let (mut a, mut c) = (
        r.iter().cloned().fold(f64::INFINITY, f64::min),
        r.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    for _ in 0..200 {
        let m1 = a + (c - a) / 3.0;
        let m2 = c - (c - a) / 3.0;
        if worst(m1) <= worst(m2) {
            c = m2;
        } else {
            a = m1;
        }
    }
    let b = 0.5 * (a + c);
    (b, worst(b))
}
