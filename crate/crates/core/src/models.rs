//! Small differentiable predictors with hand-written backpropagation.
//!
//! Parameters live in one flat vector. Dense layers store their weight matrix
//! row-major (`outputs x inputs`) followed by the bias.

use std::fmt;
use std::ops::Deref;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{poly_features_on, Basis, Batch, Targets, Task};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    /// Affine map with bias.
    Linear { inputs: usize, outputs: usize },
    /// Scalar polynomial `Σ aⱼ φⱼ(x)` of the first feature, no separate bias.
    Polynomial {
        degree: usize,
        basis: Basis,
        domain: (f64, f64),
    },
    /// Fully connected network; `layers` lists widths from input to output.
    Mlp { layers: Vec<usize>, activation: Activation },
}

impl Architecture {
    pub fn mlp(layers: &[usize]) -> Self {
        Architecture::Mlp {
            layers: layers.to_vec(),
            activation: Activation::Relu,
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Architecture::Linear { inputs, outputs } => outputs * inputs + outputs,
            Architecture::Polynomial { degree, .. } => degree + 1,
            Architecture::Mlp { layers, .. } => layers.windows(2).map(|w| w[0] * w[1] + w[1]).sum(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Architecture::Linear { inputs, .. } => *inputs,
            Architecture::Polynomial { .. } => 1,
            Architecture::Mlp { layers, .. } => layers[0],
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Architecture::Linear { outputs, .. } => *outputs,
            Architecture::Polynomial { .. } => 1,
            Architecture::Mlp { layers, .. } => *layers.last().unwrap(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Architecture::Linear { outputs, .. } if *outputs == 0 => {
                Err(Error::param("linear model needs at least one output"))
            }
            Architecture::Polynomial { domain, .. } if !(domain.1 > domain.0) => {
                Err(Error::param("polynomial domain must satisfy lo < hi"))
            }
            Architecture::Mlp { layers, .. } if layers.len() < 2 || layers.contains(&0) => {
                Err(Error::param("mlp needs at least two nonzero layer widths"))
            }
            _ => Ok(()),
        }
    }
}

/// Plain-text shape descriptor, e.g. `mlp relu 2 70 70 2`.
impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Architecture::Linear { inputs, outputs } => write!(f, "linear {inputs} {outputs}"),
            Architecture::Polynomial { degree, basis, domain } => {
                let b = match basis {
                    Basis::Monomial => "monomial",
                    Basis::Chebyshev => "chebyshev",
                };
                write!(f, "polynomial {b} {degree} {:?} {:?}", domain.0, domain.1)
            }
            Architecture::Mlp { layers, activation } => {
                let a = match activation {
                    Activation::Relu => "relu",
                    Activation::Tanh => "tanh",
                };
                write!(f, "mlp {a}")?;
                for l in layers {
                    write!(f, " {l}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Format {
            what: "shape descriptor",
            detail: s.trim().to_string(),
        };
        let tok: Vec<&str> = s.split_whitespace().collect();
        let num = |t: &str| t.parse::<usize>().map_err(|_| bad());
        let arch = match tok.as_slice() {
            ["linear", i, o] => Architecture::Linear {
                inputs: num(i)?,
                outputs: num(o)?,
            },
            ["polynomial", b, d, lo, hi] => Architecture::Polynomial {
                degree: num(d)?,
                basis: match *b {
                    "monomial" => Basis::Monomial,
                    "chebyshev" => Basis::Chebyshev,
                    _ => return Err(bad()),
                },
                domain: (lo.parse().map_err(|_| bad())?, hi.parse().map_err(|_| bad())?),
            },
            ["mlp", a, rest @ ..] => Architecture::Mlp {
                activation: match *a {
                    "relu" => Activation::Relu,
                    "tanh" => Activation::Tanh,
                    _ => return Err(bad()),
                },
                layers: rest.iter().map(|t| num(t)).collect::<Result<_>>()?,
            },
            _ => return Err(bad()),
        };
        arch.validate()?;
        Ok(arch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    Zeros,
    /// Weights and biases drawn from `U(-1/√fan_in, 1/√fan_in)`.
    #[default]
    UniformFanIn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    arch: Architecture,
    theta: Vec<f64>,
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// Layer inputs; `layers[0]` is the (basis-expanded) model input.
    layers: Vec<Matrix>,
    output: Matrix,
}

impl ForwardPass {
    pub fn output(&self) -> &Matrix {
        &self.output
    }
}

impl ModelParams {
    pub fn new(arch: Architecture, theta: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        if theta.len() != arch.param_count() {
            return Err(Error::Shape {
                context: "parameter vector",
                expected: arch.param_count(),
                got: theta.len(),
            });
        }
        if let Some(i) = theta.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                what: "model parameters",
                sample: Some(i),
            });
        }
        Ok(Self { arch, theta })
    }

    pub fn zeros(arch: Architecture) -> Result<Self> {
        let n = arch.param_count();
        Self::new(arch, vec![0.0; n])
    }

    pub fn init(arch: Architecture, init: Init, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut model = Self::zeros(arch)?;
        if init == Init::Zeros {
            return Ok(model);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shapes = model.dense_shapes();
        let mut offset = 0;
        for (fan_in, fan_out, bias) in shapes {
            let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
            let count = fan_in * fan_out + if bias { fan_out } else { 0 };
            for v in &mut model.theta[offset..offset + count] {
                *v = rng.random_range(-bound..bound);
            }
            offset += count;
        }
        Ok(model)
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Replaces the parameters; rejects non-finite entries.
    pub fn set_theta(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.theta.len() {
            return Err(Error::Shape {
                context: "parameter vector",
                expected: self.theta.len(),
                got: theta.len(),
            });
        }
        if let Some(i) = theta.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                what: "model parameters",
                sample: Some(i),
            });
        }
        self.theta.copy_from_slice(theta);
        Ok(())
    }

    pub(crate) fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn with_theta(&self, theta: &[f64]) -> Result<Self> {
        let mut m = self.clone();
        m.set_theta(theta)?;
        Ok(m)
    }

    /// `(fan_in, fan_out, has_bias)` per dense layer in parameter order.
    fn dense_shapes(&self) -> Vec<(usize, usize, bool)> {
        match &self.arch {
            Architecture::Linear { inputs, outputs } => vec![(*inputs, *outputs, true)],
            Architecture::Polynomial { degree, .. } => vec![(degree + 1, 1, false)],
            Architecture::Mlp { layers, .. } => layers.windows(2).map(|w| (w[0], w[1], true)).collect(),
        }
    }

    fn activation(&self) -> Option<Activation> {
        match &self.arch {
            Architecture::Mlp { activation, .. } => Some(*activation),
            _ => None,
        }
    }

    pub fn forward(&self, features: &Matrix) -> Result<Matrix> {
        Ok(self.forward_pass(features)?.output)
    }

    pub fn forward_pass(&self, features: &Matrix) -> Result<ForwardPass> {
        if features.cols() != self.arch.input_dim() {
            return Err(Error::Shape {
                context: "model input",
                expected: self.arch.input_dim(),
                got: features.cols(),
            });
        }
        let input = match &self.arch {
            Architecture::Polynomial { degree, basis, domain } => {
                poly_features_on(&features.column(0), *degree, *basis, *domain)
            }
            _ => features.clone(),
        };
        let shapes = self.dense_shapes();
        let act = self.activation();
        let mut layers = vec![input];
        let mut offset = 0;
        for (k, &(fan_in, fan_out, bias)) in shapes.iter().enumerate() {
            let w = &self.theta[offset..offset + fan_in * fan_out];
            offset += fan_in * fan_out;
            let b = if bias {
                let b = &self.theta[offset..offset + fan_out];
                offset += fan_out;
                Some(b)
            } else {
                None
            };
            let mut out = dense_forward(layers.last().unwrap(), w, b, fan_out);
            if k + 1 < shapes.len() {
                if let Some(a) = act {
                    for r in 0..out.rows() {
                        for v in out.row_mut(r) {
                            *v = a.apply(*v);
                        }
                    }
                }
                layers.push(out);
            } else {
                return Ok(ForwardPass { layers, output: out });
            }
        }
        unreachable!("every architecture has at least one dense layer")
    }

    /// Gradient of `Σᵢ Σⱼ output_grad[i, j] · output[i, j]` with respect to θ.
    pub fn backward(&self, pass: &ForwardPass, output_grad: &Matrix) -> Result<Vec<f64>> {
        let out = &pass.output;
        if output_grad.rows() != out.rows() || output_grad.cols() != out.cols() {
            return Err(Error::Shape {
                context: "output gradient",
                expected: out.rows() * out.cols(),
                got: output_grad.rows() * output_grad.cols(),
            });
        }
        let shapes = self.dense_shapes();
        let act = self.activation();
        let mut offsets = Vec::with_capacity(shapes.len());
        let mut o = 0;
        for &(fi, fo, bias) in &shapes {
            offsets.push(o);
            o += fi * fo + if bias { fo } else { 0 };
        }
        let mut grad = vec![0.0; self.theta.len()];
        let mut delta = output_grad.clone();
        for k in (0..shapes.len()).rev() {
            let (fan_in, fan_out, bias) = shapes[k];
            let off = offsets[k];
            let input = &pass.layers[k];
            {
                let (gw, rest) = grad[off..].split_at_mut(fan_in * fan_out);
                for r in 0..delta.rows() {
                    let d = delta.row(r);
                    let x = input.row(r);
                    for (j, &dj) in d.iter().enumerate() {
                        if dj == 0.0 {
                            continue;
                        }
                        let row = &mut gw[j * fan_in..(j + 1) * fan_in];
                        for (g, &xi) in row.iter_mut().zip(x) {
                            *g += dj * xi;
                        }
                    }
                    if bias {
                        for (g, &dj) in rest[..fan_out].iter_mut().zip(d) {
                            *g += dj;
                        }
                    }
                }
            }
            if k == 0 {
                break;
            }
            let w = &self.theta[off..off + fan_in * fan_out];
            let a = act.expect("hidden layers only exist in mlps");
            let mut next = Matrix::zeros(delta.rows(), fan_in);
            for r in 0..delta.rows() {
                let d = delta.row(r);
                let nr = next.row_mut(r);
                for (j, &dj) in d.iter().enumerate() {
                    if dj == 0.0 {
                        continue;
                    }
                    for (n, &wji) in nr.iter_mut().zip(&w[j * fan_in..(j + 1) * fan_in]) {
                        *n += dj * wji;
                    }
                }
                for (n, &y) in nr.iter_mut().zip(input.row(r)) {
                    *n *= a.derivative_from_output(y);
                }
            }
            delta = next;
        }
        if let Some(i) = grad.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                what: "parameter gradient",
                sample: Some(i),
            });
        }
        Ok(grad)
    }

    /// Writes `<stem>.bin` (little-endian f64 parameters) and `<stem>.shape`.
    pub fn save_checkpoint(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        let bytes: Vec<u8> = self.theta.iter().flat_map(|v| v.to_le_bytes()).collect();
        let bin = dir.join(format!("{stem}.bin"));
        std::fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))?;
        let shape = dir.join(format!("{stem}.shape"));
        std::fs::write(&shape, format!("{}\n", self.arch)).map_err(|e| Error::io(&shape, e))
    }

    pub fn load_checkpoint(dir: impl AsRef<Path>, stem: &str) -> Result<Self> {
        let dir = dir.as_ref();
        let shape = dir.join(format!("{stem}.shape"));
        let arch: Architecture = std::fs::read_to_string(&shape)
            .map_err(|e| Error::io(&shape, e))?
            .parse()?;
        let bin = dir.join(format!("{stem}.bin"));
        let bytes = std::fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
        if bytes.len() % 8 != 0 {
            return Err(Error::Format {
                what: "checkpoint",
                detail: format!("{} bytes is not a whole number of f64 values", bytes.len()),
            });
        }
        let theta = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(arch, theta)
    }
}

fn dense_forward(x: &Matrix, w: &[f64], b: Option<&[f64]>, fan_out: usize) -> Matrix {
    let fan_in = x.cols();
    let mut out = Matrix::zeros(x.rows(), fan_out);
    for r in 0..x.rows() {
        let xr = x.row(r);
        let or = out.row_mut(r);
        for (j, o) in or.iter_mut().enumerate() {
            let wr = &w[j * fan_in..(j + 1) * fan_in];
            let mut s = b.map_or(0.0, |b| b[j]);
            for (a, c) in wr.iter().zip(xr) {
                s += a * c;
            }
            *o = s;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    SquaredError,
    CrossEntropy,
}

impl LossKind {
    pub fn for_task(task: Task) -> Self {
        match task {
            Task::Regression => LossKind::SquaredError,
            Task::Classification { .. } => LossKind::CrossEntropy,
        }
    }

    pub fn check_task(self, task: Task) -> Result<()> {
        match (self, task) {
            (LossKind::SquaredError, Task::Regression) | (LossKind::CrossEntropy, Task::Classification { .. }) => {
                Ok(())
            }
            _ => Err(Error::param(format!("{self:?} loss is incompatible with {task:?}"))),
        }
    }
}

/// Nonnegative per-sample losses `g(θ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossVector(Vec<f64>);

impl LossVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Numeric {
                what: "per-sample loss",
                sample: Some(i),
            });
        }
        Ok(Self(values))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for LossVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

fn check_prediction_shape(kind: LossKind, predictions: &Matrix, targets: &Targets) -> Result<()> {
    if predictions.rows() != targets.len() {
        return Err(Error::Shape {
            context: "predictions vs targets",
            expected: targets.len(),
            got: predictions.rows(),
        });
    }
    match (kind, targets) {
        (LossKind::SquaredError, Targets::Real(_)) if predictions.cols() == 1 => Ok(()),
        (LossKind::SquaredError, Targets::Real(_)) => Err(Error::Shape {
            context: "regression output width",
            expected: 1,
            got: predictions.cols(),
        }),
        (LossKind::CrossEntropy, Targets::Labels(l)) => match l.iter().find(|&&c| c >= predictions.cols()) {
            Some(&c) => Err(Error::param(format!(
                "label {c} exceeds logit width {}",
                predictions.cols()
            ))),
            None => Ok(()),
        },
        _ => Err(Error::param(format!("{kind:?} loss needs matching target type"))),
    }
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub fn per_sample_loss(kind: LossKind, predictions: &Matrix, targets: &Targets) -> Result<LossVector> {
    check_prediction_shape(kind, predictions, targets)?;
    let mut out = Vec::with_capacity(predictions.rows());
    for i in 0..predictions.rows() {
        let p = predictions.row(i);
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                what: "prediction",
                sample: Some(i),
            });
        }
        let loss = match targets {
            Targets::Real(y) => (p[0] - y[i]).powi(2),
            Targets::Labels(y) => (log_sum_exp(p) - p[y[i]]).max(0.0),
        };
        out.push(loss);
    }
    LossVector::new(out)
}

/// `weights[i] · ∂gᵢ/∂prediction` row by row.
pub fn loss_output_grad(kind: LossKind, predictions: &Matrix, targets: &Targets, weights: &[f64]) -> Result<Matrix> {
    check_prediction_shape(kind, predictions, targets)?;
    if weights.len() != predictions.rows() {
        return Err(Error::Shape {
            context: "sample weights",
            expected: predictions.rows(),
            got: weights.len(),
        });
    }
    let mut g = Matrix::zeros(predictions.rows(), predictions.cols());
    for (i, &w) in weights.iter().enumerate() {
        let p = predictions.row(i);
        let gr = g.row_mut(i);
        match targets {
            Targets::Real(y) => gr[0] = w * 2.0 * (p[0] - y[i]),
            Targets::Labels(y) => {
                let lse = log_sum_exp(p);
                for (k, (gk, &pk)) in gr.iter_mut().zip(p).enumerate() {
                    let soft = (pk - lse).exp();
                    *gk = w * (soft - if k == y[i] { 1.0 } else { 0.0 });
                }
            }
        }
    }
    Ok(g)
}

/// `Σᵢ weightsᵢ ∇θ gᵢ(θ)` over the batch with one forward and one backward pass.
pub fn weighted_loss_grad(model: &ModelParams, batch: &Batch, kind: LossKind, weights: &[f64]) -> Result<Vec<f64>> {
    if weights.len() != batch.len() {
        return Err(Error::Shape {
            context: "sample weights",
            expected: batch.len(),
            got: weights.len(),
        });
    }
    if let Some(i) = weights.iter().position(|w| !(*w >= 0.0)) {
        return Err(Error::param(format!("weight {i} is negative or NaN")));
    }
    let pass = model.forward_pass(&batch.features)?;
    let dout = loss_output_grad(kind, pass.output(), &batch.targets, weights)?;
    model.backward(&pass, &dout)
}

/// Predicted class per row (ties go to the lowest index).
pub fn argmax_rows(logits: &Matrix) -> Vec<usize> {
    (0..logits.rows())
        .map(|r| {
            let row = logits.row(r);
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_two_moons, Dataset};

    fn fd_grad(f: impl Fn(&[f64]) -> f64, theta: &[f64], h: f64) -> Vec<f64> {
        let mut t = theta.to_vec();
        (0..theta.len())
            .map(|i| {
                let orig = t[i];
                t[i] = orig + h;
                let fp = f(&t);
                t[i] = orig - h;
                let fm = f(&t);
                t[i] = orig;
                (fp - fm) / (2.0 * h)
            })
            .collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        diff / na.max(nb).max(1e-12)
    }

    #[test]
    fn zero_linear_predicts_zero() {
        let m = ModelParams::zeros(Architecture::Linear { inputs: 3, outputs: 1 }).unwrap();
        let x = Matrix::from_rows(&[[1.0, -2.0, 3.0], [0.5, 0.5, 0.5]]).unwrap();
        assert_eq!(m.forward(&x).unwrap().as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn polynomial_at_one_sums_coefficients() {
        let arch = Architecture::Polynomial {
            degree: 3,
            basis: Basis::Monomial,
            domain: (-1.0, 1.0),
        };
        let m = ModelParams::new(arch, vec![0.5, -1.0, 2.0, 0.25]).unwrap();
        let y = m.forward(&Matrix::column_vector(&[1.0])).unwrap();
        assert!((y.get(0, 0) - 1.75).abs() < 1e-15);
    }

    #[test]
    fn mlp_two_moons_shape() {
        let arch = Architecture::mlp(&[2, 70, 70, 2]);
        assert_eq!(arch.param_count(), 2 * 70 + 70 + 70 * 70 + 70 + 70 * 2 + 2);
        let m = ModelParams::init(arch, Init::UniformFanIn, 0).unwrap();
        let ds = gen_two_moons(10, 0.1, 0).unwrap();
        assert_eq!(m.forward(ds.features()).unwrap().cols(), 2);
    }

    #[test]
    fn input_width_mismatch() {
        let m = ModelParams::zeros(Architecture::Linear { inputs: 3, outputs: 1 }).unwrap();
        let err = m.forward(&Matrix::zeros(2, 2)).unwrap_err();
        assert!(matches!(err, Error::Shape { .. }));
    }

    #[test]
    fn loss_examples() {
        let l = per_sample_loss(
            LossKind::SquaredError,
            &Matrix::column_vector(&[3.0]),
            &Targets::Real(vec![1.0]),
        )
        .unwrap();
        assert_eq!(l[0], 4.0);

        let uniform = per_sample_loss(
            LossKind::CrossEntropy,
            &Matrix::from_rows(&[[0.3, 0.3]]).unwrap(),
            &Targets::Labels(vec![1]),
        )
        .unwrap();
        assert!((uniform[0] - std::f64::consts::LN_2).abs() < 1e-15);

        // logits chosen so that the true class probability is exp(-0.51)
        let p = (-0.51f64).exp();
        let logits = Matrix::from_rows(&[[p.ln(), (1.0 - p).ln()]]).unwrap();
        let ce = per_sample_loss(LossKind::CrossEntropy, &logits, &Targets::Labels(vec![0])).unwrap();
        assert!((ce[0] - 0.51).abs() < 1e-12);
        assert!((p - 0.6005).abs() < 1e-4);
    }

    #[test]
    fn cross_entropy_stable_for_large_logits() {
        let logits = Matrix::from_rows(&[[1000.0, -1000.0], [-1000.0, 1000.0]]).unwrap();
        let ce = per_sample_loss(LossKind::CrossEntropy, &logits, &Targets::Labels(vec![0, 0])).unwrap();
        assert_eq!(ce[0], 0.0);
        assert!((ce[1] - 2000.0).abs() < 1e-9);
    }

    #[test]
    fn non_finite_prediction_reports_sample() {
        let err = per_sample_loss(
            LossKind::SquaredError,
            &Matrix::column_vector(&[0.0, f64::NAN]),
            &Targets::Real(vec![0.0, 0.0]),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Numeric { sample: Some(1), .. }));
    }

    #[test]
    fn zero_weights_give_zero_gradient() {
        let ds = gen_two_moons(20, 0.1, 1).unwrap();
        let m = ModelParams::init(Architecture::mlp(&[2, 5, 2]), Init::UniformFanIn, 1).unwrap();
        let g = weighted_loss_grad(&m, &ds.full_batch(), LossKind::CrossEntropy, &[0.0; 20]).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mlp_gradient_matches_finite_differences() {
        let ds = gen_two_moons(16, 0.2, 2).unwrap();
        let batch = ds.full_batch();
        for act in [Activation::Relu, Activation::Tanh] {
            let arch = Architecture::Mlp {
                layers: vec![2, 6, 5, 2],
                activation: act,
            };
            let m = ModelParams::init(arch, Init::UniformFanIn, 4).unwrap();
            let w: Vec<f64> = (0..16).map(|i| 0.1 * i as f64).collect();
            let g = weighted_loss_grad(&m, &batch, LossKind::CrossEntropy, &w).unwrap();
            let f = |t: &[f64]| {
                let p = m.with_theta(t).unwrap().forward(&batch.features).unwrap();
                let l = per_sample_loss(LossKind::CrossEntropy, &p, &batch.targets).unwrap();
                l.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()
            };
            let fd = fd_grad(f, m.theta(), 1e-6);
            assert!(rel_err(&g, &fd) < 1e-6, "{act:?}: {}", rel_err(&g, &fd));
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for arch in [
            Architecture::mlp(&[2, 4, 3]),
            Architecture::Linear { inputs: 2, outputs: 1 },
            Architecture::Polynomial {
                degree: 5,
                basis: Basis::Chebyshev,
                domain: (0.0, 1.0),
            },
        ] {
            let m = ModelParams::init(arch, Init::UniformFanIn, 9).unwrap();
            m.save_checkpoint(dir.path(), "ckpt").unwrap();
            assert_eq!(ModelParams::load_checkpoint(dir.path(), "ckpt").unwrap(), m);
        }
    }

    #[test]
    fn loss_kind_task_compatibility() {
        let ds: Dataset = gen_two_moons(4, 0.0, 0).unwrap();
        assert!(LossKind::CrossEntropy.check_task(ds.task()).is_ok());
        assert!(LossKind::SquaredError.check_task(ds.task()).is_err());
    }
}
