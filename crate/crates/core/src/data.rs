//! Synthetic datasets, polynomial feature maps and mini-batch iteration.
//!
//! Every sample carries a stable integer id in `0..n`; the id indexes its
//! constraint level and Lagrange multiplier for the lifetime of a run.

use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification { classes: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Targets {
    Real(Vec<f64>),
    Labels(Vec<usize>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Real(v) => v.len(),
            Targets::Labels(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select(&self, idx: &[usize]) -> Targets {
        match self {
            Targets::Real(v) => Targets::Real(idx.iter().map(|&i| v[i]).collect()),
            Targets::Labels(v) => Targets::Labels(idx.iter().map(|&i| v[i]).collect()),
        }
    }

    fn as_f64(&self, i: usize) -> f64 {
        match self {
            Targets::Real(v) => v[i],
            Targets::Labels(v) => v[i] as f64,
        }
    }
}

/// A labeled dataset. Row `i` always has id `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    targets: Targets,
    ids: Vec<usize>,
    task: Task,
}

impl Dataset {
    pub fn new(features: Matrix, targets: Targets, task: Task) -> Result<Self> {
        if features.rows() != targets.len() {
            return Err(Error::Shape {
                context: "dataset targets",
                expected: features.rows(),
                got: targets.len(),
            });
        }
        if let Some(r) = (0..features.rows()).find(|&r| features.row(r).iter().any(|v| !v.is_finite())) {
            return Err(Error::Numeric {
                what: "dataset features",
                sample: Some(r),
            });
        }
        match (&targets, task) {
            (Targets::Real(v), Task::Regression) => {
                if let Some(i) = v.iter().position(|t| !t.is_finite()) {
                    return Err(Error::Numeric {
                        what: "dataset targets",
                        sample: Some(i),
                    });
                }
            }
            (Targets::Labels(v), Task::Classification { classes }) => {
                if classes == 0 {
                    return Err(Error::param("classification needs at least one class"));
                }
                if let Some(i) = v.iter().position(|&c| c >= classes) {
                    return Err(Error::param(format!(
                        "label {} of sample {i} outside 0..{classes}",
                        v[i]
                    )));
                }
            }
            _ => return Err(Error::param("target type does not match task")),
        }
        let ids = (0..features.rows()).collect();
        Ok(Self {
            features,
            targets,
            ids,
            task,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn batch(&self, ids: &[usize]) -> Batch {
        Batch {
            ids: ids.to_vec(),
            features: self.features.select_rows(ids),
            targets: self.targets.select(ids),
        }
    }

    pub fn full_batch(&self) -> Batch {
        Batch {
            ids: self.ids.clone(),
            features: self.features.clone(),
            targets: self.targets.clone(),
        }
    }

    /// Rows selected by `ids`, renumbered `0..ids.len()` in the given order.
    pub fn subset(&self, ids: &[usize]) -> Result<Dataset> {
        Dataset::new(self.features.select_rows(ids), self.targets.select(ids), self.task)
    }

    /// Random train/test partition. The test part receives `round(n * test_fraction)` rows.
    pub fn split(&self, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(Error::param(format!("test fraction {test_fraction} outside [0, 1)")));
        }
        let mut order = self.ids.clone();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_test = (self.len() as f64 * test_fraction).round() as usize;
        let (test, train) = order.split_at(n_test);
        let mut train = train.to_vec();
        let mut test = test.to_vec();
        train.sort_unstable();
        test.sort_unstable();
        Ok((self.subset(&train)?, self.subset(&test)?))
    }

    /// Hex SHA-256 over task, shape, features and targets.
    pub fn signature(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("{:?}|{}x{}|", self.task, self.len(), self.dim()).as_bytes());
        for v in self.features.as_slice() {
            h.update(v.to_le_bytes());
        }
        for i in 0..self.len() {
            h.update(self.targets.as_f64(i).to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    /// Writes `id,feat_0,...,feat_{d-1},target`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["id".to_string()];
        header.extend((0..self.dim()).map(|j| format!("feat_{j}")));
        header.push("target".into());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![i.to_string()];
            rec.extend(self.features.row(i).iter().map(|v| format!("{v:?}")));
            rec.push(match &self.targets {
                Targets::Real(v) => format!("{:?}", v[i]),
                Targets::Labels(v) => v[i].to_string(),
            });
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads the format produced by [`Dataset::write_csv`]. Rows may appear in
    /// any order but the ids must be a permutation of `0..n`. For
    /// classification the class count is one more than the largest label.
    pub fn read_csv(path: impl AsRef<Path>, classification: bool) -> Result<Dataset> {
        let path = path.as_ref();
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.clone();
        let d = header.len().checked_sub(2).ok_or_else(|| Error::Format {
            what: "dataset csv",
            detail: "expected at least `id` and `target` columns".into(),
        })?;
        let expect = |j: usize, name: &str| -> Result<()> {
            if &header[j] != name {
                return Err(Error::Format {
                    what: "dataset csv",
                    detail: format!("column {j} is `{}`, expected `{name}`", &header[j]),
                });
            }
            Ok(())
        };
        expect(0, "id")?;
        for j in 0..d {
            expect(j + 1, &format!("feat_{j}"))?;
        }
        expect(d + 1, "target")?;

        let mut rows: Vec<(usize, Vec<f64>, f64)> = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| Error::Format {
                what: "dataset csv",
                detail: format!("record {}: bad {what}", line + 1),
            };
            let id: usize = rec[0].trim().parse().map_err(|_| bad("id"))?;
            let feats = (1..=d)
                .map(|j| rec[j].trim().parse::<f64>().map_err(|_| bad("feature")))
                .collect::<Result<Vec<_>>>()?;
            let target: f64 = rec[d + 1].trim().parse().map_err(|_| bad("target"))?;
            rows.push((id, feats, target));
        }
        rows.sort_by_key(|r| r.0);
        if rows.iter().enumerate().any(|(i, r)| r.0 != i) {
            return Err(Error::Format {
                what: "dataset csv",
                detail: "ids are not a permutation of 0..n".into(),
            });
        }
        let features = Matrix::from_rows(&rows.iter().map(|r| r.1.clone()).collect::<Vec<_>>())?;
        let features = if rows.is_empty() { Matrix::zeros(0, d) } else { features };
        if classification {
            let labels = rows
                .iter()
                .map(|r| {
                    if r.2 >= 0.0 && r.2.fract() == 0.0 {
                        Ok(r.2 as usize)
                    } else {
                        Err(Error::Format {
                            what: "dataset csv",
                            detail: format!("sample {}: label {} is not a class index", r.0, r.2),
                        })
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            let classes = labels.iter().max().map_or(1, |m| m + 1);
            Dataset::new(features, Targets::Labels(labels), Task::Classification { classes })
        } else {
            Dataset::new(
                features,
                Targets::Real(rows.iter().map(|r| r.2).collect()),
                Task::Regression,
            )
        }
    }
}

/// A mini-batch: sample ids plus copies of their rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub ids: Vec<usize>,
    pub features: Matrix,
    pub targets: Targets,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Two interleaved half-circles (labels 0 and 1) with isotropic Gaussian noise.
pub fn gen_two_moons(n: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::param(format!("two moons needs an even n >= 2, got {n}")));
    }
    if !(noise >= 0.0) {
        return Err(Error::param(format!("noise must be >= 0, got {noise}")));
    }
    let half = n / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for class in 0..2 {
        for k in 0..half {
            let t = if half == 1 {
                0.0
            } else {
                PI * k as f64 / (half - 1) as f64
            };
            let (x, y) = if class == 0 {
                (t.cos(), t.sin())
            } else {
                (1.0 - t.cos(), 0.5 - t.sin())
            };
            rows.push([x + noise * gaussian(&mut rng), y + noise * gaussian(&mut rng)]);
            labels.push(class);
        }
    }
    Dataset::new(
        Matrix::from_rows(&rows)?,
        Targets::Labels(labels),
        Task::Classification { classes: 2 },
    )
}

/// `n` equally spaced inputs on `[0, 1]` with targets `cos(2πx) + N(0, sigma²)`.
pub fn gen_noisy_cosine(n: usize, sigma: f64, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::param("noisy cosine needs n >= 1"));
    }
    if !(sigma >= 0.0) {
        return Err(Error::param(format!("sigma must be >= 0, got {sigma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..n)
        .map(|i| if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 })
        .collect();
    let ys = xs
        .iter()
        .map(|&x| cosine_wave(x) + sigma * gaussian(&mut rng))
        .collect();
    Dataset::new(Matrix::column_vector(&xs), Targets::Real(ys), Task::Regression)
}

/// The noiseless curve behind [`gen_noisy_cosine`].
pub fn cosine_wave(x: f64) -> f64 {
    (2.0 * PI * x).cos()
}

/// Each random feature row appears twice, with targets `y` and `y + label_gap`.
/// Sample `2k` holds the lower target and `2k + 1` the upper one.
pub fn gen_conflicting_pairs(n_pairs: usize, d: usize, label_gap: f64, seed: u64) -> Result<Dataset> {
    if n_pairs == 0 {
        return Err(Error::param("need at least one pair"));
    }
    if !(label_gap > 0.0) {
        return Err(Error::param(format!("label gap must be > 0, got {label_gap}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(2 * n_pairs);
    let mut ys = Vec::with_capacity(2 * n_pairs);
    for _ in 0..n_pairs {
        let x: Vec<f64> = (0..d).map(|_| gaussian(&mut rng)).collect();
        let y = gaussian(&mut rng);
        rows.push(x.clone());
        rows.push(x);
        ys.push(y);
        ys.push(y + label_gap);
    }
    let features = if d == 0 {
        Matrix::zeros(2 * n_pairs, 0)
    } else {
        Matrix::from_rows(&rows)?
    };
    Dataset::new(features, Targets::Real(ys), Task::Regression)
}

/// Linear regression data where the samples with the largest first feature
/// carry corrupted labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierRegression {
    pub n: usize,
    pub d: usize,
    /// Standard deviation of the label noise on clean samples.
    pub noise: f64,
    /// Fraction of samples whose label is shifted.
    pub outlier_fraction: f64,
    /// Additive label shift applied to outliers.
    pub shift: f64,
    /// Seeds the ground-truth weights; train and test draws must share it.
    pub task_seed: u64,
}

impl Default for OutlierRegression {
    fn default() -> Self {
        Self {
            n: 400,
            d: 2,
            noise: 0.3,
            outlier_fraction: 0.05,
            shift: 2.0,
            task_seed: 0,
        }
    }
}

pub fn gen_outlier_regression(p: &OutlierRegression, seed: u64) -> Result<Dataset> {
    if p.n == 0 || p.d == 0 {
        return Err(Error::param("outlier regression needs n >= 1 and d >= 1"));
    }
    if !(0.0..=1.0).contains(&p.outlier_fraction) || !(p.noise >= 0.0) {
        return Err(Error::param("outlier fraction must lie in [0, 1] and noise be >= 0"));
    }
    let mut task_rng = ChaCha8Rng::seed_from_u64(p.task_seed);
    let w: Vec<f64> = (0..p.d).map(|_| gaussian(&mut task_rng)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..p.n)
        .map(|_| (0..p.d).map(|_| gaussian(&mut rng)).collect())
        .collect();
    let mut ys: Vec<f64> = rows
        .iter()
        .map(|x| x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + p.noise * gaussian(&mut rng))
        .collect();
    let n_out = (p.n as f64 * p.outlier_fraction).round() as usize;
    let mut order: Vec<usize> = (0..p.n).collect();
    order.sort_by(|&a, &b| rows[b][0].total_cmp(&rows[a][0]));
    for &i in &order[..n_out] {
        ys[i] += p.shift;
    }
    Dataset::new(Matrix::from_rows(&rows)?, Targets::Real(ys), Task::Regression)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    Monomial,
    Chebyshev,
}

/// Design matrix with column `j` the `j`-th basis polynomial, taking `x` in `[-1, 1]`.
pub fn poly_features(x: &[f64], degree: usize, basis: Basis) -> Matrix {
    poly_features_on(x, degree, basis, (-1.0, 1.0))
}

/// Like [`poly_features`]; the Chebyshev basis first maps `domain` affinely onto
/// `[-1, 1]`. Monomials are always evaluated at the raw `x`.
pub fn poly_features_on(x: &[f64], degree: usize, basis: Basis, domain: (f64, f64)) -> Matrix {
    let cols = degree + 1;
    let mut m = Matrix::zeros(x.len(), cols);
    for (i, &xi) in x.iter().enumerate() {
        let row = m.row_mut(i);
        match basis {
            Basis::Monomial => {
                let mut p = 1.0;
                for v in row.iter_mut() {
                    *v = p;
                    p *= xi;
                }
            }
            Basis::Chebyshev => {
                let (lo, hi) = domain;
                let t = (2.0 * xi - lo - hi) / (hi - lo);
                row[0] = 1.0;
                if cols > 1 {
                    row[1] = t;
                }
                for k in 2..cols {
                    row[k] = 2.0 * t * row[k - 1] - row[k - 2];
                }
            }
        }
    }
    m
}

/// Identifies one epoch's shuffle: a counter-based stream keyed on the run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpochSeed {
    pub run_seed: u64,
    pub epoch: u64,
}

impl From<u64> for EpochSeed {
    fn from(run_seed: u64) -> Self {
        Self { run_seed, epoch: 0 }
    }
}

/// Shuffled partition of the dataset's ids into batches of `batch_size`; the last may be smaller.
pub fn batch_iter(
    dataset: &Dataset,
    batch_size: usize,
    seed: impl Into<EpochSeed>,
) -> Result<impl Iterator<Item = Batch> + '_> {
    let order = batch_order(dataset.len(), batch_size, seed.into())?;
    Ok(order.into_iter().map(move |ids| dataset.batch(&ids)))
}

/// The id lists [`batch_iter`] would produce.
pub fn batch_order(n: usize, batch_size: usize, seed: EpochSeed) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 || batch_size > n.max(1) {
        return Err(Error::param(format!("batch size {batch_size} outside 1..={n}")));
    }
    let mut ids: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.run_seed);
    rng.set_stream(seed.epoch);
    ids.shuffle(&mut rng);
    Ok(ids.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_moons_is_balanced() {
        let ds = gen_two_moons(1000, 0.1, 0).unwrap();
        let Targets::Labels(l) = ds.targets() else { panic!() };
        assert_eq!(l.iter().filter(|&&c| c == 0).count(), 500);
        assert_eq!(l.iter().filter(|&&c| c == 1).count(), 500);
        assert_eq!(ds.task(), Task::Classification { classes: 2 });
    }

    #[test]
    fn two_moons_zero_noise_on_circles() {
        let ds = gen_two_moons(4, 0.0, 7).unwrap();
        let Targets::Labels(l) = ds.targets() else { panic!() };
        for (i, &li) in l.iter().enumerate() {
            let r = ds.features().row(i);
            let (cx, cy) = if li == 0 { (0.0, 0.0) } else { (1.0, 0.5) };
            let rad = ((r[0] - cx).powi(2) + (r[1] - cy).powi(2)).sqrt();
            assert!((rad - 1.0).abs() < 1e-12);
            // upper half for class 0, lower half for class 1
            if li == 0 {
                assert!(r[1] >= -1e-12);
            } else {
                assert!(r[1] <= 0.5 + 1e-12);
            }
        }
    }

    #[test]
    fn generators_are_deterministic() {
        let a = gen_two_moons(1000, 0.1, 3).unwrap();
        let b = gen_two_moons(1000, 0.1, 3).unwrap();
        assert_eq!(a.features().as_slice(), b.features().as_slice());
        assert_eq!(a.signature(), b.signature());
        assert_ne!(a.signature(), gen_two_moons(1000, 0.1, 4).unwrap().signature());
    }

    #[test]
    fn generator_parameter_errors() {
        assert!(gen_two_moons(3, 0.1, 0).is_err());
        assert!(gen_two_moons(0, 0.1, 0).is_err());
        assert!(gen_two_moons(4, -0.1, 0).is_err());
        assert!(gen_noisy_cosine(0, 0.2, 0).is_err());
        assert!(gen_noisy_cosine(5, -0.2, 0).is_err());
        assert!(gen_conflicting_pairs(0, 1, 1.0, 0).is_err());
        assert!(gen_conflicting_pairs(1, 1, 0.0, 0).is_err());
    }

    #[test]
    fn noisy_cosine_zero_noise_exact() {
        let ds = gen_noisy_cosine(5, 0.0, 0).unwrap();
        let Targets::Real(y) = ds.targets() else { panic!() };
        for (i, &yi) in y.iter().enumerate() {
            assert_eq!(yi, cosine_wave(ds.features().get(i, 0)));
        }
    }

    #[test]
    fn noisy_cosine_residual_spread() {
        let ds = gen_noisy_cosine(20, 0.2, 1).unwrap();
        let Targets::Real(y) = ds.targets() else { panic!() };
        let res: Vec<f64> = (0..20).map(|i| y[i] - cosine_wave(ds.features().get(i, 0))).collect();
        let mean = res.iter().sum::<f64>() / 20.0;
        let sd = (res.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / 19.0).sqrt();
        assert!((0.1..=0.3).contains(&sd), "residual sd {sd}");
    }

    #[test]
    fn conflicting_pairs_structure() {
        let ds = gen_conflicting_pairs(1, 1, 2.0, 0).unwrap();
        let Targets::Real(y) = ds.targets() else { panic!() };
        assert_eq!(ds.features().row(0), ds.features().row(1));
        assert!((y[1] - y[0] - 2.0).abs() < 1e-12);

        let ds = gen_conflicting_pairs(8, 2, 1.0, 0).unwrap();
        assert_eq!(ds.len(), 16);
        let mut distinct: Vec<Vec<u64>> = (0..16)
            .map(|i| ds.features().row(i).iter().map(|v| v.to_bits()).collect())
            .collect();
        distinct.sort();
        distinct.dedup();
        assert_eq!(distinct.len(), 8);
    }

    #[test]
    fn outlier_regression_shifts_requested_fraction() {
        let p = OutlierRegression {
            noise: 0.0,
            ..Default::default()
        };
        let ds = gen_outlier_regression(&p, 5).unwrap();
        let clean = gen_outlier_regression(
            &OutlierRegression {
                shift: 0.0,
                ..p.clone()
            },
            5,
        )
        .unwrap();
        let (Targets::Real(a), Targets::Real(b)) = (ds.targets(), clean.targets()) else {
            panic!()
        };
        let shifted = a.iter().zip(b).filter(|(x, y)| x != y).count();
        assert_eq!(shifted, 20);
    }

    #[test]
    fn poly_features_examples() {
        let m = poly_features(&[0.0], 2, Basis::Monomial);
        assert_eq!(m.row(0), &[1.0, 0.0, 0.0]);
        let m = poly_features(&[1.0], 3, Basis::Chebyshev);
        assert_eq!(m.row(0), &[1.0, 1.0, 1.0, 1.0]);
        let m = poly_features(&[0.5], 2, Basis::Chebyshev);
        assert_eq!(m.row(0), &[1.0, 0.5, -0.5]);
    }

    #[test]
    fn chebyshev_matches_trig_definition() {
        let xs: Vec<f64> = (0..11).map(|i| -1.0 + 0.2 * i as f64).collect();
        let m = poly_features(&xs, 8, Basis::Chebyshev);
        for (i, &x) in xs.iter().enumerate() {
            let th = x.clamp(-1.0, 1.0).acos();
            for k in 0..=8 {
                assert!((m.get(i, k) - (k as f64 * th).cos()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn chebyshev_better_conditioned() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 / 19.0).collect();
        for degree in [5, 10, 15] {
            let cheb = poly_features_on(&xs, degree, Basis::Chebyshev, (0.0, 1.0)).condition_number();
            let mono = poly_features_on(&xs, degree, Basis::Monomial, (0.0, 1.0)).condition_number();
            assert!(cheb <= mono, "degree {degree}: {cheb} vs {mono}");
        }
    }

    #[test]
    fn batch_partition_sizes() {
        let ds = gen_noisy_cosine(10, 0.1, 0).unwrap();
        let sizes: Vec<usize> = batch_iter(&ds, 4, 1).unwrap().map(|b| b.len()).collect();
        assert_eq!(sizes, vec![4, 4, 2]);
        let all: Vec<Batch> = batch_iter(&ds, 10, 1).unwrap().collect();
        assert_eq!(all.len(), 1);
        let mut ids = all[0].ids.clone();
        ids.sort();
        assert_eq!(ids, (0..10).collect::<Vec<_>>());
        assert!(batch_iter(&ds, 0, 1).is_err());
        assert!(batch_iter(&ds, 11, 1).is_err());
    }

    #[test]
    fn batch_order_keyed_on_epoch() {
        let a = batch_order(50, 7, EpochSeed { run_seed: 3, epoch: 2 }).unwrap();
        let b = batch_order(50, 7, EpochSeed { run_seed: 3, epoch: 2 }).unwrap();
        let c = batch_order(50, 7, EpochSeed { run_seed: 3, epoch: 3 }).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn csv_round_trip_and_shuffled_ids() {
        let dir = tempfile::tempdir().unwrap();
        let ds = gen_two_moons(10, 0.1, 0).unwrap();
        let p = dir.path().join("moons.csv");
        ds.write_csv(&p).unwrap();
        assert_eq!(Dataset::read_csv(&p, true).unwrap(), ds);

        let p2 = dir.path().join("shuffled.csv");
        std::fs::write(&p2, "id,feat_0,target\n1,0.5,2.0\n0,0.25,1.0\n").unwrap();
        let r = Dataset::read_csv(&p2, false).unwrap();
        assert_eq!(r.features().column(0), vec![0.25, 0.5]);
        assert_eq!(r.targets(), &Targets::Real(vec![1.0, 2.0]));

        std::fs::write(&p2, "id,feat_0,target\n0,0.5,2.0\n2,0.25,1.0\n").unwrap();
        assert!(Dataset::read_csv(&p2, false).is_err());
        std::fs::write(&p2, "id,x,target\n0,0.5,2.0\n").unwrap();
        assert!(Dataset::read_csv(&p2, false).is_err());
    }

    #[test]
    fn split_renumbers() {
        let ds = gen_two_moons(100, 0.1, 0).unwrap();
        let (tr, te) = ds.split(0.3, 1).unwrap();
        assert_eq!((tr.len(), te.len()), (70, 30));
        assert_eq!(tr.ids(), (0..70).collect::<Vec<_>>().as_slice());
    }
}
