//! Fixtures shared by the benchmarks.

use fqr_core::funcspace::inner_product;
use fqr_core::regression::build_design;
use fqr_core::simulation::{generate, truth_for, GeneratedSample};
use fqr_core::{Contamination, Design, ModelKind, ScenarioConfig, UpsilonChoice};

/// One replication of a simulation scenario with `n` curves.
pub fn sample(model: ModelKind, upsilon: UpsilonChoice, contamination: Contamination, n: usize) -> GeneratedSample {
    let mut cfg = ScenarioConfig::new(model, upsilon, contamination);
    cfg.n = n;
    let truth = truth_for(&cfg).expect("valid scenario");
    generate(&cfg, &truth, 0).expect("generated sample")
}

/// Score design on the first `p` generating basis functions of Model 1.
pub fn model1_design(n: usize, p: usize) -> (Design, Vec<f64>) {
    let mut cfg = ScenarioConfig::new(ModelKind::Model1, UpsilonChoice::U00, Contamination::C1 { mu: 12.0 });
    cfg.n = n;
    let truth = truth_for(&cfg).expect("valid scenario");
    let s = generate(&cfg, &truth, 0).expect("generated sample");
    let x = nalgebra::DMatrix::from_fn(n, p, |i, j| inner_product(&s.curves[i], &truth.phis[j]).unwrap());
    (build_design(&x, false).expect("design"), s.y)
}
