//! Constraint levels, Lagrange multipliers and the dual update rules.
//!
//! Plain feasible learning is the `α = ∞` case of the resilient formulation:
//! the multiplier decay `λ/α` vanishes and one code path serves both.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-sample loss bounds `ε`, always stored expanded to one entry per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    levels: Vec<f64>,
}

impl ConstraintSpec {
    pub fn uniform(epsilon: f64, n: usize) -> Result<Self> {
        Self::per_sample(vec![epsilon; n])
    }

    pub fn per_sample(levels: Vec<f64>) -> Result<Self> {
        if let Some(i) = levels.iter().position(|e| !(*e >= 0.0) || !e.is_finite()) {
            return Err(Error::param(format!(
                "constraint level {} of sample {i} must be finite and >= 0",
                levels[i]
            )));
        }
        Ok(Self { levels })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn select(&self, ids: &[usize]) -> Vec<f64> {
        ids.iter().map(|&i| self.levels[i]).collect()
    }
}

/// `ε` as configured: one scalar broadcast over samples, or explicit levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Epsilon {
    Uniform(f64),
    PerSample(Vec<f64>),
}

impl Default for Epsilon {
    fn default() -> Self {
        Epsilon::Uniform(0.0)
    }
}

impl Epsilon {
    pub fn expand(&self, n: usize) -> Result<ConstraintSpec> {
        match self {
            Epsilon::Uniform(e) => ConstraintSpec::uniform(*e, n),
            Epsilon::PerSample(v) if v.len() == n => ConstraintSpec::per_sample(v.clone()),
            Epsilon::PerSample(v) => Err(Error::Shape {
                context: "per-sample constraint levels",
                expected: n,
                got: v.len(),
            }),
        }
    }
}

/// Whether constraints may be relaxed by slacks priced at `(α/2)‖u‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Resilience {
    /// Hard constraints (`α = ∞`).
    Feasible,
    Resilient {
        alpha: f64,
    },
}

impl Resilience {
    pub fn resilient(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::param(format!("alpha must be finite and > 0, got {alpha}")));
        }
        Ok(Resilience::Resilient { alpha })
    }

    /// `α`, infinite for hard constraints.
    pub fn alpha(self) -> f64 {
        match self {
            Resilience::Feasible => f64::INFINITY,
            Resilience::Resilient { alpha } => alpha,
        }
    }
}

/// Nonnegative multipliers, one per training sample, starting at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierState {
    values: Vec<f64>,
    /// Step counter of each coordinate's most recent update.
    last_update: Vec<Option<u64>>,
}

impl MultiplierState {
    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
            last_update: vec![None; n],
        }
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::param(format!("multiplier {i} must be finite and >= 0")));
        }
        let n = values.len();
        Ok(Self {
            values,
            last_update: vec![None; n],
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn last_update(&self, id: usize) -> Option<u64> {
        self.last_update[id]
    }

    pub fn select(&self, ids: &[usize]) -> Vec<f64> {
        ids.iter().map(|&i| self.values[i]).collect()
    }

    /// Projected ascent on the coordinates in `ids` only; others stay bitwise untouched.
    pub fn ascend(
        &mut self,
        ids: &[usize],
        violations: &[f64],
        step_size: f64,
        resilience: Resilience,
        step: u64,
    ) -> Result<()> {
        let mut slice = self.select(ids);
        dual_step(&mut slice, violations, step_size, resilience)?;
        self.assign(ids, &slice, step);
        Ok(())
    }

    /// Overwrites the coordinates in `ids`.
    pub fn assign(&mut self, ids: &[usize], values: &[f64], step: u64) {
        for (&i, &v) in ids.iter().zip(values) {
            debug_assert!(v >= 0.0);
            self.values[i] = v;
            self.last_update[i] = Some(step);
        }
    }

    /// Writes `id,lambda` rows.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("id,lambda\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{i},{v:?}\n"));
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(out.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = csv::Reader::from_path(path.as_ref())?;
        let mut rows: Vec<(usize, f64)> = Vec::new();
        for rec in r.deserialize() {
            rows.push(rec?);
        }
        rows.sort_by_key(|r| r.0);
        if rows.iter().enumerate().any(|(i, r)| r.0 != i) {
            return Err(Error::Format {
                what: "multiplier csv",
                detail: "ids are not a permutation of 0..n".into(),
            });
        }
        Self::from_values(rows.into_iter().map(|r| r.1).collect())
    }
}

/// Slack variables recovered from multipliers as `u = λ/α`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlackView(Vec<f64>);

impl SlackView {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Shape { context, expected, got });
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `g - ε`, negative for strictly satisfied constraints.
pub fn violations(losses: &[f64], levels: &[f64]) -> Result<Vec<f64>> {
    check_len("constraint levels", losses.len(), levels.len())?;
    Ok(losses.iter().zip(levels).map(|(g, e)| g - e).collect())
}

/// One projected ascent step `λ ← [λ + η(v − λ/α)]₊`; the decay is skipped for hard constraints.
pub fn dual_step(lambda: &mut [f64], violations: &[f64], step_size: f64, resilience: Resilience) -> Result<()> {
    check_len("violations", lambda.len(), violations.len())?;
    if !(step_size > 0.0) {
        return Err(Error::param(format!("dual step size must be > 0, got {step_size}")));
    }
    let alpha = resilience.alpha();
    for (i, (l, &v)) in lambda.iter_mut().zip(violations).enumerate() {
        let decay = if alpha.is_finite() { *l / alpha } else { 0.0 };
        let next = (*l + step_size * (v - decay)).max(0.0);
        if !next.is_finite() {
            return Err(Error::Numeric {
                what: "multiplier",
                sample: Some(i),
            });
        }
        *l = next;
    }
    Ok(())
}

pub fn dual_step_fl(lambda: &mut [f64], violations: &[f64], step_size: f64) -> Result<()> {
    dual_step(lambda, violations, step_size, Resilience::Feasible)
}

pub fn dual_step_rfl(lambda: &mut [f64], violations: &[f64], step_size: f64, alpha: f64) -> Result<()> {
    dual_step(lambda, violations, step_size, Resilience::resilient(alpha)?)
}

/// `λᵀ(g − ε)`.
pub fn lagrangian_fl(losses: &[f64], levels: &[f64], lambda: &[f64]) -> Result<f64> {
    check_len("multipliers", losses.len(), lambda.len())?;
    Ok(dot(lambda, &violations(losses, levels)?))
}

/// `λᵀ(g − ε) − ‖λ‖²/(2α)`.
pub fn lagrangian_alpha(losses: &[f64], levels: &[f64], lambda: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(lagrangian_fl(losses, levels, lambda)? - dot(lambda, lambda) / (2.0 * alpha))
}

/// `(α/2)‖u‖² + λᵀ(g − ε − u)`, the Lagrangian with explicit slacks.
pub fn lagrangian_rfl(losses: &[f64], levels: &[f64], slack: &[f64], lambda: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_len("slacks", losses.len(), slack.len())?;
    check_len("multipliers", losses.len(), lambda.len())?;
    let v = violations(losses, levels)?;
    let linear: f64 = lambda.iter().zip(&v).zip(slack).map(|((l, vi), u)| l * (vi - u)).sum();
    Ok(0.5 * alpha * dot(slack, slack) + linear)
}

/// Unique maximizer of the regularized Lagrangian over `λ ≥ 0`: `α[g − ε]₊`.
pub fn analytic_dual_opt(losses: &[f64], levels: &[f64], alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    Ok(violations(losses, levels)?
        .into_iter()
        .map(|v| alpha * v.max(0.0))
        .collect())
}

pub fn slack_view(lambda: &[f64], alpha: f64) -> Result<SlackView> {
    check_alpha(alpha)?;
    if let Some(i) = lambda.iter().position(|l| !(*l >= 0.0)) {
        return Err(Error::param(format!("multiplier {i} is negative")));
    }
    Ok(SlackView(lambda.iter().map(|l| l / alpha).collect()))
}

/// Clamped-and-squared objective `(α/2)‖[g − ε]₊‖²`.
pub fn cserm_objective(losses: &[f64], levels: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let v = violations(losses, levels)?;
    Ok(0.5 * alpha * v.iter().map(|x| x.max(0.0).powi(2)).sum::<f64>())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) {
        return Err(Error::param(format!("alpha must be > 0, got {alpha}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EPS: f64 = 0.51;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn violation_examples() {
        assert!(close(violations(&[0.8], &[EPS]).unwrap()[0], 0.29));
        assert_eq!(violations(&[EPS, EPS], &[EPS, EPS]).unwrap(), vec![0.0, 0.0]);
        assert!(close(violations(&[0.3], &[EPS]).unwrap()[0], -0.21));
        assert!(violations(&[0.3], &[EPS, EPS]).is_err());
    }

    #[test]
    fn fl_step_examples() {
        let mut l = [0.0];
        dual_step_fl(&mut l, &[0.29], 0.1).unwrap();
        assert!(close(l[0], 0.029));

        let mut l = [0.05];
        dual_step_fl(&mut l, &[-1.0], 0.1).unwrap();
        assert_eq!(l[0], 0.0);

        let mut l = [0.0; 3];
        for _ in 0..1000 {
            dual_step_fl(&mut l, &[-0.1, 0.0, -3.0], 0.5).unwrap();
        }
        assert_eq!(l, [0.0; 3]);
        assert!(dual_step_fl(&mut l, &[0.0, 0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn fl_blowup_is_numeric_error() {
        let mut l = [f64::MAX];
        let err = dual_step_fl(&mut l, &[f64::MAX], 2.0).unwrap_err();
        assert!(matches!(err, Error::Numeric { sample: Some(0), .. }));
    }

    #[test]
    fn rfl_step_examples() {
        let mut l = [1.0];
        dual_step_rfl(&mut l, &[0.0], 0.1, 2.0).unwrap();
        assert!(close(l[0], 0.95));

        let mut l = [0.0];
        for _ in 0..10_000 {
            dual_step_rfl(&mut l, &[0.3], 0.1, 1.0).unwrap();
        }
        assert!(close(l[0], 0.3));

        assert!(dual_step_rfl(&mut l, &[0.3], 0.1, 0.0).is_err());
    }

    #[test]
    fn infinite_alpha_matches_fl() {
        let v = [0.4, -0.2, 1.3];
        let mut a = [0.5, 0.1, 0.0];
        let mut b = a;
        dual_step_fl(&mut a, &v, 0.3).unwrap();
        dual_step(&mut b, &v, 0.3, Resilience::Resilient { alpha: f64::INFINITY }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lagrangian_examples() {
        assert_eq!(lagrangian_fl(&[0.6], &[EPS], &[0.0]).unwrap(), 0.0);
        assert!(close(lagrangian_fl(&[0.6], &[EPS], &[0.18]).unwrap(), 0.0162));
        assert!(lagrangian_fl(&[0.1, 0.5], &[EPS, EPS], &[3.0, 7.0]).unwrap() <= 0.0);
        assert_eq!(lagrangian_alpha(&[0.6], &[EPS], &[0.0], 2.0).unwrap(), 0.0);
        assert!(close(lagrangian_alpha(&[0.6], &[EPS], &[0.18], 2.0).unwrap(), 0.0081));
    }

    #[test]
    fn analytic_optimum_and_cserm() {
        let g = [0.6, 0.3];
        let e = [EPS, EPS];
        let l = analytic_dual_opt(&g, &e, 2.0).unwrap();
        assert!(close(l[0], 0.18) && l[1] == 0.0);
        assert_eq!(analytic_dual_opt(&[0.1, 0.2], &e, 2.0).unwrap(), vec![0.0, 0.0]);
        assert!(close(cserm_objective(&g, &e, 2.0).unwrap(), 0.0081));
        assert!(close(
            lagrangian_alpha(&g, &e, &l, 2.0).unwrap(),
            cserm_objective(&g, &e, 2.0).unwrap()
        ));
        assert_eq!(cserm_objective(&[0.1, 0.5], &e, 2.0).unwrap(), 0.0);
        assert!(close(cserm_objective(&[1.51], &[EPS], 1.0).unwrap(), 0.5));
    }

    #[test]
    fn slack_examples() {
        assert_eq!(slack_view(&[0.0, 0.0], 2.0).unwrap().values(), &[0.0, 0.0]);
        let u = slack_view(&[0.18], 2.0).unwrap();
        assert!(close(u.values()[0], 0.6 - EPS));
        assert!(slack_view(&[-1.0], 2.0).is_err());
    }

    #[test]
    fn multiplier_state_touches_only_batch() {
        let mut s = MultiplierState::zeros(5);
        s.ascend(&[1, 3], &[0.5, 0.2], 0.1, Resilience::Feasible, 7).unwrap();
        assert_eq!(s.values()[0].to_bits(), 0.0f64.to_bits());
        assert!(close(s.values()[1], 0.05));
        assert_eq!(s.last_update(3), Some(7));
        assert_eq!(s.last_update(4), None);
    }

    #[test]
    fn multiplier_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let s = MultiplierState::from_values(vec![0.0, 0.2, 6.0]).unwrap();
        s.write_csv(&p).unwrap();
        assert_eq!(MultiplierState::read_csv(&p).unwrap().values(), s.values());
    }

    #[test]
    fn epsilon_broadcast() {
        assert_eq!(Epsilon::Uniform(0.2).expand(3).unwrap().levels(), &[0.2; 3]);
        assert!(Epsilon::PerSample(vec![0.1]).expand(2).is_err());
        assert!(Epsilon::Uniform(-0.1).expand(2).is_err());
    }

    proptest! {
        #[test]
        fn dual_steps_stay_nonnegative(
            v in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 6), 1..40),
            eta in 1e-3f64..2.0,
            alpha in prop::option::of(0.1f64..10.0),
        ) {
            let res = alpha.map_or(Resilience::Feasible, |a| Resilience::Resilient { alpha: a });
            let mut l = vec![0.0; 6];
            for step in &v {
                dual_step(&mut l, step, eta, res).unwrap();
                prop_assert!(l.iter().all(|&x| x >= 0.0));
            }
        }

        #[test]
        fn rfl_multipliers_bounded(
            v in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 4), 1..200),
            alpha in 0.1f64..10.0,
            ratio in 0.01f64..1.0,
        ) {
            let eta = ratio * alpha;
            let bound = v.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
            let mut l = vec![0.0; 4];
            for step in &v {
                dual_step_rfl(&mut l, step, eta, alpha).unwrap();
                for &x in &l {
                    prop_assert!(x <= alpha * bound * (1.0 + 1e-12));
                }
            }
        }

        #[test]
        fn regularized_lagrangian_concave_in_lambda(
            g in prop::collection::vec(0.0f64..3.0, 5),
            eps in 0.0f64..2.0,
            alpha in 0.1f64..10.0,
            a in prop::collection::vec(0.0f64..5.0, 5),
            b in prop::collection::vec(0.0f64..5.0, 5),
            t in 0.0f64..1.0,
        ) {
            let e = vec![eps; 5];
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| t * x + (1.0 - t) * y).collect();
            let lhs = lagrangian_alpha(&g, &e, &mid, alpha).unwrap();
            let rhs = t * lagrangian_alpha(&g, &e, &a, alpha).unwrap()
                + (1.0 - t) * lagrangian_alpha(&g, &e, &b, alpha).unwrap();
            prop_assert!(lhs >= rhs - 1e-9);
        }
    }
}
