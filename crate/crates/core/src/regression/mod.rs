//! Robust regression of a scalar response on principal-direction scores.

pub mod design;
pub mod estimators;
pub mod model;
pub mod rho;

pub use design::{build_design, n_quadratic, vech_pairs, vech_products, CoefVector, Design};
pub use estimators::{ls_fit, mm_fit, s_estimate, SEstimate, DEFAULT_N_SUB};
pub use model::{
    assemble, fit, from_centered, predict, to_centered, FitMethod, FitOptions, FitResult, Selection, DEFAULT_SEED,
};
pub use rho::{m_scale, rho, RhoConfig};
