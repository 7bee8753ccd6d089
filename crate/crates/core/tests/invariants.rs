use feasible_core::data::{batch_order, gen_conflicting_pairs, gen_noisy_cosine};
use feasible_core::feasibility::{violations, ConstraintSpec, Epsilon};
use feasible_core::models::{Architecture, ModelParams};
use feasible_core::oracle::{brute_force_feasible, SearchFamily};
use feasible_core::trainer::{train, Method, Trainer, TrainerConfig};
use feasible_core::{Basis, Dataset, EpochSeed, Matrix, Targets, Task};
use proptest::prelude::*;

fn constant_model() -> ModelParams {
    let arch = Architecture::Polynomial {
        degree: 0,
        basis: Basis::Monomial,
        domain: (-1.0, 1.0),
    };
    ModelParams::zeros(arch).unwrap()
}

fn regression(ys: &[f64]) -> Dataset {
    let x = Matrix::from_vec(ys.len(), 1, vec![0.0; ys.len()]).unwrap();
    Dataset::new(x, Targets::Real(ys.to_vec()), Task::Regression).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn trainer_feasible_implies_oracle_feasible(
        ys in prop::collection::vec(-2.0f64..2.0, 1..6),
        eps in 0.05f64..2.0,
    ) {
        let ds = regression(&ys);
        let cfg = TrainerConfig {
            method: Method::Fl,
            epsilon: Epsilon::Uniform(eps),
            primal_lr: 0.05,
            dual_lr: 0.1,
            epochs: 2000,
            ..Default::default()
        };
        let rec = train(&cfg, constant_model(), &ds, &ds).unwrap();
        let trained = rec.train_losses.iter().map(|g| g - eps).fold(0.0, f64::max);
        let spec = ConstraintSpec::uniform(eps, ds.len()).unwrap();
        let oracle = brute_force_feasible(&ds, &spec, SearchFamily::Constant, 1e-6).unwrap();
        if trained <= 1e-6 {
            prop_assert!(oracle.feasible, "trainer reached {trained:e}, oracle {:?}", oracle);
        }
        // The oracle's minimax violation is a lower bound for any constant.
        prop_assert!(oracle.max_violation <= trained + 1e-9);
    }

    #[test]
    fn absent_multipliers_are_bitwise_stable(seed in 0u64..1000, batch in 1usize..16) {
        let ds = gen_conflicting_pairs(8, 2, 2.0, seed).unwrap();
        let cfg = TrainerConfig {
            method: Method::Rfl,
            alpha: Some(0.5),
            dual_lr: 0.2,
            batch_size: Some(batch),
            ..Default::default()
        };
        let mut t = Trainer::new(&cfg, ModelParams::zeros(Architecture::Linear { inputs: 2, outputs: 1 }).unwrap(), &ds).unwrap();
        for epoch in 0..3 {
            for ids in batch_order(ds.len(), batch, EpochSeed { run_seed: seed, epoch }).unwrap() {
                let before: Vec<u64> = t.multipliers().values().iter().map(|v| v.to_bits()).collect();
                t.step(&ds.batch(&ids)).unwrap();
                for (i, (b, a)) in before.iter().zip(t.multipliers().values()).enumerate() {
                    if !ids.contains(&i) {
                        prop_assert_eq!(*b, a.to_bits());
                    }
                }
            }
        }
    }

    #[test]
    fn rfl_multipliers_stay_below_alpha_scaled_violation(
        seed in 0u64..1000,
        alpha in 0.1f64..5.0,
        eta_frac in 0.01f64..1.0,
    ) {
        let ds = gen_conflicting_pairs(4, 1, 2.0, seed).unwrap();
        let eta = eta_frac * alpha;
        let cfg = TrainerConfig {
            method: Method::Rfl,
            alpha: Some(alpha),
            dual_lr: eta,
            primal_lr: 1e-2,
            optimizer: feasible_core::PrimalOptimizer::adam(),
            ..Default::default()
        };
        let mut t = Trainer::new(&cfg, ModelParams::zeros(Architecture::Linear { inputs: 1, outputs: 1 }).unwrap(), &ds).unwrap();
        let mut vmax: f64 = 0.0;
        for _ in 0..300 {
            let rep = t.step(&ds.full_batch()).unwrap();
            let v = violations(&rep.losses, &vec![0.0; ds.len()]).unwrap();
            vmax = vmax.max(v.iter().cloned().fold(0.0, f64::max));
            for &l in t.multipliers().values() {
                prop_assert!(l >= 0.0);
                prop_assert!(l <= alpha * vmax + eta * vmax + 1e-12);
            }
        }
    }
}

#[test]
fn fl_multipliers_exceed_any_threshold_on_infeasible_data() {
    let ds = gen_conflicting_pairs(2, 1, 2.0, 0).unwrap();
    let cfg = TrainerConfig {
        method: Method::Fl,
        dual_lr: 1.0,
        primal_lr: 1e-2,
        optimizer: feasible_core::PrimalOptimizer::adam(),
        ..Default::default()
    };
    let mut t = Trainer::new(
        &cfg,
        ModelParams::zeros(Architecture::Linear { inputs: 1, outputs: 1 }).unwrap(),
        &ds,
    )
    .unwrap();
    let mut top = 0.0;
    for threshold in [10.0, 100.0, 1000.0] {
        while top <= threshold {
            t.step(&ds.full_batch()).unwrap();
            top = t.multipliers().values().iter().cloned().fold(0.0, f64::max);
        }
    }
    assert!(top > 1000.0);
}

#[test]
fn noisy_cosine_residual_spread() {
    let ds = gen_noisy_cosine(20, 0.2, 1).unwrap();
    let Targets::Real(y) = ds.targets() else { unreachable!() };
    let x = ds.features().column(0);
    let r: Vec<f64> = y
        .iter()
        .zip(&x)
        .map(|(y, x)| y - feasible_core::data::cosine_wave(*x))
        .collect();
    let mean = r.iter().sum::<f64>() / 20.0;
    let sd = (r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 20.0).sqrt();
    assert!((0.1..=0.3).contains(&sd), "{sd}");
}
