//! Ready-made experiment configs for `gen-config`.

pub const TEMPLATES: &[(&str, &str)] = &[
    ("two-moons-fl", TWO_MOONS_FL),
    ("two-moons-erm", TWO_MOONS_ERM),
    ("cosine-fl", COSINE_FL),
    ("cosine-erm", COSINE_ERM),
    ("outliers-erm", OUTLIERS_ERM),
    ("outliers-rfl", OUTLIERS_RFL),
    ("conflicting-fl", CONFLICTING_FL),
    ("conflicting-rfl", CONFLICTING_RFL),
];

pub fn template(name: &str) -> Option<&'static str> {
    TEMPLATES.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

const TWO_MOONS_FL: &str = r#"# Two moons, feasible learning with a 0.9 probability floor on the true class.
name = "fl"
seeds = [0, 1, 2, 3, 4]
output_dir = "runs/two-moons-fl"

[data]
generator = "two_moons"
n = 1000
noise = 0.1
seed = 0
test_n = 1000

[model]
kind = "mlp"
layers = [2, 70, 70, 2]
activation = "relu"

[trainer]
method = "fl"
epsilon = 0.10536051565782628   # -ln(0.9)
primal_lr = 5e-4
dual_lr = 1e-2
batch_size = 512
epochs = 250

[trainer.optimizer]
kind = "adam"

[metrics]
quantiles = [0.5, 0.9, 0.95, 0.99]
top_k = 10
"#;

const TWO_MOONS_ERM: &str = r#"# Two moons, empirical risk minimization baseline.
name = "erm"
seeds = [0, 1, 2, 3, 4]
output_dir = "runs/two-moons-erm"

[data]
generator = "two_moons"
n = 1000
noise = 0.1
seed = 0
test_n = 1000

[model]
kind = "mlp"
layers = [2, 70, 70, 2]
activation = "relu"

[trainer]
method = "erm"
primal_lr = 5e-4
batch_size = 512
epochs = 250

[trainer.optimizer]
kind = "adam"
"#;

const COSINE_FL: &str = r#"# Degree-20 polynomial on 20 noisy cosine samples; every squared error <= sigma.
name = "fl"
seeds = [0]
output_dir = "runs/cosine-fl"

[data]
generator = "noisy_cosine"
n = 20
sigma = 0.2
seed = 0

[model]
kind = "polynomial"
degree = 20
basis = "chebyshev"
domain = [0.0, 1.0]
init = "zeros"

[trainer]
method = "fl"
epsilon = 0.2
primal_lr = 0.05
dual_lr = 0.05
epochs = 50000
"#;

const COSINE_ERM: &str = r#"# Degree-20 polynomial on 20 noisy cosine samples; least squares interpolates.
name = "erm"
seeds = [0]
output_dir = "runs/cosine-erm"

[data]
generator = "noisy_cosine"
n = 20
sigma = 0.2
seed = 0

[model]
kind = "polynomial"
degree = 20
basis = "chebyshev"
domain = [0.0, 1.0]
init = "zeros"

[trainer]
method = "erm"
primal_lr = 0.8
epochs = 50000

[trainer.optimizer]
kind = "sgd_momentum"
momentum = 0.9995
"#;

const OUTLIERS_ERM: &str = r#"# Linear regression with 5% shifted labels, ERM baseline.
name = "erm"
seeds = [0, 1, 2, 3, 4]
output_dir = "runs/outliers-erm"

[data]
generator = "outlier_regression"
n = 400
seed = 0
test_n = 2000

[model]
kind = "linear"
inputs = 2
outputs = 1
init = "zeros"

[trainer]
method = "erm"
primal_lr = 1e-2
epochs = 3000
cosine_schedule = true

[trainer.optimizer]
kind = "adam"
"#;

const OUTLIERS_RFL: &str = r#"# Linear regression with 5% shifted labels, resilient feasible learning.
name = "rfl"
seeds = [0, 1, 2, 3, 4]
output_dir = "runs/outliers-rfl"

[data]
generator = "outlier_regression"
n = 400
seed = 0
test_n = 2000

[model]
kind = "linear"
inputs = 2
outputs = 1
init = "zeros"

[trainer]
method = "rfl"
alpha = 1.0
epsilon = 0.1
primal_lr = 1e-2
dual_lr = 1e-2
epochs = 3000
cosine_schedule = true

[trainer.optimizer]
kind = "adam"
"#;

const CONFLICTING_FL: &str = r#"# Duplicated inputs with conflicting targets: no model meets epsilon = 0.
name = "fl"
seeds = [0]
output_dir = "runs/conflicting-fl"

[data]
generator = "conflicting_pairs"
n_pairs = 8
d = 2
label_gap = 2.0

[model]
kind = "linear"
inputs = 2
outputs = 1
init = "zeros"

[trainer]
method = "fl"
epsilon = 0.0
primal_lr = 1e-2
dual_lr = 1e-2
epochs = 5000

[trainer.optimizer]
kind = "adam"
"#;

const CONFLICTING_RFL: &str = r#"# Same infeasible data; the resilient relaxation keeps multipliers bounded.
name = "rfl"
seeds = [0]
output_dir = "runs/conflicting-rfl"

[data]
generator = "conflicting_pairs"
n_pairs = 8
d = 2
label_gap = 2.0

[model]
kind = "linear"
inputs = 2
outputs = 1
init = "zeros"

[trainer]
method = "rfl"
alpha = 1.0
epsilon = 0.0
primal_lr = 1e-2
dual_lr = 1e-2
epochs = 5000

[trainer.optimizer]
kind = "adam"
"#;
