//! `verify`: run the oracle suites.

use feasible_core::oracle::{
    check_gradients, check_prop1_random, check_prop2, GradientFault, GradientReport, GradientTarget, ModelFamily,
    Prop1Suite, Prop2Report,
};
use serde::Serialize;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Props,
    Gradients,
    All,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct VerifyReport {
    pub prop2: Vec<Prop2Report>,
    pub prop1: Option<Prop1Suite>,
    pub gradients: Vec<GradientReport>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.prop2.iter().all(Prop2Report::passed)
            && self.prop1.as_ref().is_none_or(Prop1Suite::passed)
            && self.gradients.iter().all(GradientReport::passed)
    }

    /// One line per failed check.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for r in self.prop2.iter().filter(|r| !r.passed()) {
            out.push(format!(
                "prop2 {:?}: {} trials over tolerance, max discrepancy {:e}",
                r.family,
                r.failures.len(),
                r.max_discrepancy
            ));
        }
        if let Some(s) = self.prop1.as_ref().filter(|s| !s.passed()) {
            out.push(format!("prop1: {} trials failed", s.failures.len()));
        }
        for r in self.gradients.iter().filter(|r| !r.passed()) {
            let w = r.worst.as_ref().expect("failed reports have a worst entry");
            out.push(format!(
                "gradient {:?}/{:?}: draw {} coordinate {} analytic {:e} numeric {:e} (rel. error {:e})",
                w.family, w.target, w.draw, w.coordinate, w.analytic, w.numeric, w.rel_error
            ));
        }
        out
    }
}

pub fn verify(suite: Suite, fault: Option<GradientFault>) -> Result<VerifyReport> {
    let mut report = VerifyReport::default();
    if matches!(suite, Suite::Props | Suite::All) {
        for (k, family) in ModelFamily::ALL.into_iter().enumerate() {
            report.prop2.push(check_prop2(family, 250, 1e-10, k as u64)?);
        }
        report.prop1 = Some(check_prop1_random(100, 200, 1e-10, 0)?);
    }
    if matches!(suite, Suite::Gradients | Suite::All) {
        for (k, family) in ModelFamily::ALL.into_iter().enumerate() {
            for target in [GradientTarget::WeightedLoss, GradientTarget::Cserm] {
                report
                    .gradients
                    .push(check_gradients(family, target, 20, 1e-5, k as u64, fault)?);
            }
        }
    }
    Ok(report)
}
