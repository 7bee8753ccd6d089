//! Distribution statistics over per-sample losses and multiplier analytics.
//!
//! Quantiles follow one convention throughout: the `q`-th empirical quantile
//! of `n` values is the `max(⌈q·n⌉, 1)`-th order statistic (1-indexed).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Losses sorted ascending, each paired with its sample id.
#[derive(Debug, Clone, PartialEq)]
pub struct LossDistribution {
    sorted: Vec<(usize, f64)>,
}

impl LossDistribution {
    pub fn new(losses: &[f64]) -> Self {
        let mut sorted: Vec<(usize, f64)> = losses.iter().copied().enumerate().collect();
        sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        Self { sorted }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.sorted
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.sorted.iter().map(|e| e.1)
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn quantile(&self, q: f64) -> f64 {
        self.sorted[quantile_rank(q, self.len()) - 1].1
    }
}

fn quantile_rank(q: f64, n: usize) -> usize {
    ((q * n as f64).ceil() as usize).clamp(1, n)
}

/// Step points `(value, fraction ≤ value)`, one per distinct value.
pub fn empirical_cdf(losses: &[f64]) -> Result<Vec<(f64, f64)>> {
    if losses.is_empty() {
        return Err(Error::param("empirical cdf of an empty loss vector"));
    }
    let dist = LossDistribution::new(losses);
    let n = dist.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (k, v) in dist.values().enumerate() {
        let frac = (k + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 = frac,
            _ => out.push((v, frac)),
        }
    }
    Ok(out)
}

/// Mean of the losses strictly above the `q`-th quantile, or the maximum when none are.
pub fn cvar(losses: &[f64], q: f64) -> Result<f64> {
    if losses.is_empty() {
        return Err(Error::param("cvar of an empty loss vector"));
    }
    if !(0.0..1.0).contains(&q) {
        return Err(Error::param(format!("cvar quantile {q} outside [0, 1)")));
    }
    let dist = LossDistribution::new(losses);
    let threshold = dist.quantile(q);
    let tail: Vec<f64> = dist.values().filter(|&v| v > threshold).collect();
    Ok(if tail.is_empty() {
        dist.values().last().unwrap()
    } else {
        tail.iter().sum::<f64>() / tail.len() as f64
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSummary {
    pub mean: f64,
    /// Worst per-sample loss: the Rawlsian objective at the current parameters.
    pub max: f64,
    pub accuracy: Option<f64>,
}

/// Mean and max loss; accuracy when predicted and true labels are both given.
pub fn summary(losses: &[f64], labels: Option<(&[usize], &[usize])>) -> Result<LossSummary> {
    if losses.is_empty() {
        return Err(Error::param("summary of an empty loss vector"));
    }
    let accuracy = match labels {
        Some((pred, truth)) => {
            if pred.len() != truth.len() {
                return Err(Error::Shape {
                    context: "predicted labels",
                    expected: truth.len(),
                    got: pred.len(),
                });
            }
            Some(pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len().max(1) as f64)
        }
        None => None,
    };
    Ok(LossSummary {
        mean: losses.iter().sum::<f64>() / losses.len() as f64,
        max: losses.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        accuracy,
    })
}

pub const ZERO_MULTIPLIER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierStats {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    pub fraction_zero: f64,
    /// Ids of the largest multipliers, largest first.
    pub top_k_ids: Vec<usize>,
    /// Quantiles at 0, 0.1, ..., 1.0.
    pub deciles: Vec<f64>,
}

impl MultiplierStats {
    pub fn fraction_positive(&self) -> f64 {
        1.0 - self.fraction_zero
    }
}

pub fn multiplier_stats(lambda: &[f64], k: usize) -> Result<MultiplierStats> {
    if lambda.is_empty() {
        return Err(Error::param("multiplier stats of an empty vector"));
    }
    if k > lambda.len() {
        return Err(Error::param(format!("top-k {k} exceeds {} multipliers", lambda.len())));
    }
    let dist = LossDistribution::new(lambda);
    let n = lambda.len();
    let zeros = lambda.iter().filter(|&&l| l <= ZERO_MULTIPLIER_TOL).count();
    let mut by_size: Vec<usize> = (0..n).collect();
    by_size.sort_by(|&a, &b| lambda[b].total_cmp(&lambda[a]).then(a.cmp(&b)));
    Ok(MultiplierStats {
        min: dist.entries()[0].1,
        mean: lambda.iter().sum::<f64>() / n as f64,
        max: dist.entries()[n - 1].1,
        fraction_zero: zeros as f64 / n as f64,
        top_k_ids: by_size[..k].to_vec(),
        deciles: (0..=10).map(|d| dist.quantile(d as f64 / 10.0)).collect(),
    })
}

/// True-class logit minus the largest competing logit, per row.
pub fn logit_margins(logits: &Matrix, labels: &[usize]) -> Result<Vec<f64>> {
    if logits.rows() != labels.len() {
        return Err(Error::Shape {
            context: "margin labels",
            expected: logits.rows(),
            got: labels.len(),
        });
    }
    Ok((0..logits.rows())
        .map(|r| {
            let row = logits.row(r);
            let other = row
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != labels[r])
                .map(|(_, &v)| v)
                .fold(f64::NEG_INFINITY, f64::max);
            row[labels[r]] - other
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub value: f64,
    /// Set when an input is constant and the correlation undefined; `value` is then 0.
    pub degenerate: bool,
}

/// Ranks starting at 1, ties sharing their average rank.
fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(a: &[f64], b: &[f64]) -> Result<Correlation> {
    if a.len() != b.len() {
        return Err(Error::Shape {
            context: "spearman inputs",
            expected: a.len(),
            got: b.len(),
        });
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        return Ok(Correlation {
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(Correlation {
        value: (cov / (va * vb).sqrt()).clamp(-1.0, 1.0),
        degenerate: false,
    })
}

/// Rank correlation between multipliers and negated margins; positive when
/// samples close to (or across) the decision boundary carry large multipliers.
pub fn margin_multiplier_correlation(lambda: &[f64], margins: &[f64]) -> Result<Correlation> {
    let neg: Vec<f64> = margins.iter().map(|m| -m).collect();
    spearman(lambda, &neg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cdf_examples() {
        let c = empirical_cdf(&[1.0, 2.0, 2.0, 5.0]).unwrap();
        assert_eq!(c, vec![(1.0, 0.25), (2.0, 0.75), (5.0, 1.0)]);
        assert_eq!(empirical_cdf(&[3.0; 4]).unwrap(), vec![(3.0, 1.0)]);
        assert!(empirical_cdf(&[]).is_err());
    }

    #[test]
    fn cvar_examples() {
        let l = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(cvar(&l, 0.5).unwrap(), 3.5);
        assert_eq!(cvar(&l, 0.0).unwrap(), 3.0);
        assert_eq!(cvar(&[2.0, 5.0, 5.0], 0.9).unwrap(), 5.0);
        assert!(cvar(&l, 1.0).is_err());
        assert!(cvar(&l, -0.1).is_err());
        assert!(cvar(&[], 0.5).is_err());
    }

    #[test]
    fn summary_examples() {
        let s = summary(&[0.0, 0.0, 0.0], None).unwrap();
        assert_eq!((s.mean, s.max, s.accuracy), (0.0, 0.0, None));
        let s = summary(&[0.1, 0.5], None).unwrap();
        assert!((s.mean - 0.3).abs() < 1e-15);
        assert_eq!(s.max, 0.5);
        let s = summary(&[1.0, 1.0], Some((&[0, 1], &[0, 0]))).unwrap();
        assert_eq!(s.accuracy, Some(0.5));
    }

    #[test]
    fn random_classifier_accuracy() {
        use rand::{Rng, SeedableRng};
        for classes in [2usize, 3, 5] {
            for seed in 0..5 {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let truth: Vec<usize> = (0..2000).map(|_| rng.random_range(0..classes)).collect();
                let pred: Vec<usize> = (0..2000).map(|_| rng.random_range(0..classes)).collect();
                let acc = summary(&vec![0.0; 2000], Some((&pred, &truth)))
                    .unwrap()
                    .accuracy
                    .unwrap();
                assert!((acc - 1.0 / classes as f64).abs() < 0.05, "C={classes}: {acc}");
            }
        }
    }

    #[test]
    fn multiplier_stats_examples() {
        let s = multiplier_stats(&[0.0; 4], 0).unwrap();
        assert_eq!(s.fraction_zero, 1.0);
        let s = multiplier_stats(&[0.0, 0.2, 6.0], 1).unwrap();
        assert_eq!(s.top_k_ids, vec![2]);
        assert!((s.fraction_zero + s.fraction_positive() - 1.0).abs() < 1e-15);
        assert_eq!(s.deciles.len(), 11);
        assert_eq!((s.deciles[0], s.deciles[10]), (0.0, 6.0));
        assert!(multiplier_stats(&[0.0], 2).is_err());
    }

    #[test]
    fn margins_and_correlation() {
        let logits = Matrix::from_rows(&[[2.0, 0.5], [0.0, 1.0]]).unwrap();
        assert_eq!(logit_margins(&logits, &[0, 0]).unwrap(), vec![1.5, -1.0]);

        let margins = [3.0, 2.0, 1.0, 0.0, -1.0];
        let lambda = [0.0, 0.1, 0.5, 0.7, 2.0];
        let c = margin_multiplier_correlation(&lambda, &margins).unwrap();
        assert!((c.value - 1.0).abs() < 1e-12 && !c.degenerate);
        let c = margin_multiplier_correlation(&[0.3; 5], &margins).unwrap();
        assert!(c.degenerate && c.value == 0.0);
    }

    #[test]
    fn spearman_handles_ties() {
        // by hand: ranks a = [1.5, 1.5, 3, 4], b = [1, 2, 3, 4]
        let c = spearman(&[0.0, 0.0, 1.0, 2.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let expected = 4.5 / (4.5f64 * 5.0).sqrt();
        assert!((c.value - expected).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn cdf_monotone_ends_at_one(v in prop::collection::vec(0.0f64..10.0, 1..100)) {
            let c = empirical_cdf(&v).unwrap();
            prop_assert!(c.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1));
            prop_assert_eq!(c.last().unwrap().1, 1.0);
        }

        #[test]
        fn cvar_monotone_in_q(v in prop::collection::vec(0.0f64..10.0, 1..60), a in 0.0f64..0.999, b in 0.0f64..0.999) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(cvar(&v, lo).unwrap() <= cvar(&v, hi).unwrap() + 1e-12);
        }

        #[test]
        fn permutation_invariant(v in prop::collection::vec(0.0f64..10.0, 1..60), q in 0.0f64..0.999, seed in 0u64..1000) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut w = v.clone();
            w.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(cvar(&v, q).unwrap(), cvar(&w, q).unwrap());
            prop_assert_eq!(empirical_cdf(&v).unwrap(), empirical_cdf(&w).unwrap());
        }

        // Distinct values only: with ties the strict-exceedance tail can shrink
        // under dominance (e.g. [0,0,1,10] vs [0,0,0,10] at q = 0.25).
        #[test]
        fn cvar_respects_sorted_dominance(
            base in prop::collection::btree_set(0u32..1_000_000, 2..60),
            bumps in prop::collection::vec(0u32..1000, 60),
            q in 0.0f64..0.999,
        ) {
            let b: Vec<f64> = base.iter().map(|&x| x as f64 * 1e-3).collect();
            let mut a: Vec<f64> = Vec::with_capacity(b.len());
            let mut prev = f64::NEG_INFINITY;
            for (x, bump) in b.iter().zip(&bumps) {
                let v = (x + *bump as f64 * 1e-4).max(prev + 1e-7);
                a.push(v);
                prev = v;
            }
            prop_assert!(cvar(&a, q).unwrap() >= cvar(&b, q).unwrap() - 1e-12);
        }
    }
}
