//! Fixtures shared by the step benchmarks.

use feasible_core::data::gen_two_moons;
use feasible_core::feasibility::Epsilon;
use feasible_core::trainer::{Method, Trainer, TrainerConfig};
use feasible_core::{Architecture, Batch, Dataset, Init, ModelParams, PrimalOptimizer};

pub const BATCH: usize = 512;

pub fn two_moons() -> Dataset {
    gen_two_moons(1000, 0.1, 0).expect("valid generator parameters")
}

pub fn first_batch(ds: &Dataset) -> Batch {
    ds.batch(&(0..BATCH).collect::<Vec<_>>())
}

/// Trainer with the two-moons hyperparameters for `method`.
pub fn trainer(method: Method, ds: &Dataset) -> Trainer {
    let cfg = TrainerConfig {
        method,
        alpha: Some(1.0),
        epsilon: Epsilon::Uniform(-(0.9f64.ln())),
        primal_lr: 5e-4,
        dual_lr: 1e-2,
        optimizer: PrimalOptimizer::adam(),
        batch_size: Some(BATCH),
        epochs: 250,
        ..Default::default()
    };
    let model =
        ModelParams::init(Architecture::mlp(&[2, 70, 70, 2]), Init::UniformFanIn, 0).expect("valid architecture");
    Trainer::new(&cfg, model, ds).expect("valid config")
}
