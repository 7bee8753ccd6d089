//! First-order optimizers for the primal parameters.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PrimalOptimizer {
    #[default]
    Sgd,
    /// Heavy-ball: `buf ← μ·buf + g`, `θ ← θ − η·buf`.
    SgdMomentum { momentum: f64 },
    /// Adaptive moment estimation with decoupled weight decay.
    Adam {
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_stabilizer")]
        stabilizer: f64,
    },
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.999
}

fn default_stabilizer() -> f64 {
    1e-8
}

impl PrimalOptimizer {
    pub fn adam() -> Self {
        PrimalOptimizer::Adam {
            beta1: default_beta1(),
            beta2: default_beta2(),
            stabilizer: default_stabilizer(),
        }
    }

    pub fn state(self, n: usize, weight_decay: f64) -> OptimizerState {
        OptimizerState {
            kind: self,
            weight_decay,
            first: vec![0.0; n],
            second: match self {
                PrimalOptimizer::Adam { .. } => vec![0.0; n],
                _ => Vec::new(),
            },
            steps: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: PrimalOptimizer,
    weight_decay: f64,
    first: Vec<f64>,
    second: Vec<f64>,
    steps: u64,
}

impl OptimizerState {
    /// Applies one update to `theta` in place.
    ///
    /// SGD variants fold weight decay into the gradient; Adam decays the
    /// parameters directly before the moment update.
    pub fn step(&mut self, theta: &mut [f64], grad: &[f64], lr: f64) {
        self.steps += 1;
        let wd = self.weight_decay;
        match self.kind {
            PrimalOptimizer::Sgd => {
                for (t, &g) in theta.iter_mut().zip(grad) {
                    *t -= lr * (g + wd * *t);
                }
            }
            PrimalOptimizer::SgdMomentum { momentum } => {
                for ((t, &g), b) in theta.iter_mut().zip(grad).zip(&mut self.first) {
                    *b = momentum * *b + g + wd * *t;
                    *t -= lr * *b;
                }
            }
            PrimalOptimizer::Adam {
                beta1,
                beta2,
                stabilizer,
            } => {
                let c1 = 1.0 - beta1.powi(self.steps as i32);
                let c2 = 1.0 - beta2.powi(self.steps as i32);
                for (((t, &g), m), v) in theta.iter_mut().zip(grad).zip(&mut self.first).zip(&mut self.second) {
                    *t *= 1.0 - lr * wd;
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    *t -= lr * (*m / c1) / ((*v / c2).sqrt() + stabilizer);
                }
            }
        }
    }
}
