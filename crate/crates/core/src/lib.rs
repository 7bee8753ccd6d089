//! Feasible learning: training with one loss constraint per sample.
//!
//! Each sample `i` gets the constraint `gᵢ(θ) ≤ εᵢ` and a multiplier `λᵢ ≥ 0`.
//! Training alternates projected dual ascent on the batch's multipliers with
//! a primal step on the multiplier-weighted loss. The resilient variant
//! prices constraint relaxations quadratically, which is equivalent to
//! minimizing `(α/2)‖[g − ε]₊‖²`.

// Parameter checks are written `!(x > 0.0)` on purpose so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod feasibility;
pub mod matrix;
pub mod metrics;
pub mod models;
pub mod optim;
pub mod oracle;
pub mod record;
pub mod trainer;

pub use data::{Basis, Batch, Dataset, EpochSeed, Targets, Task};
pub use error::{Error, Result};
pub use feasibility::{ConstraintSpec, Epsilon, MultiplierState, Resilience};
pub use matrix::Matrix;
pub use models::{Activation, Architecture, Init, LossKind, LossVector, ModelParams};
pub use optim::PrimalOptimizer;
pub use trainer::{train, DualUpdate, Method, RunRecord, RunStatus, Trainer, TrainerConfig};
