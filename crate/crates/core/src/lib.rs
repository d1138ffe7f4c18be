//! Robust MM-estimation for scalar-on-function quadratic regression.
//!
//! The pipeline works on curves sampled on a shared grid over `[0, 1]`:
//!
//! 1. [`robust_center`] locates the sample with the spatial median.
//! 2. [`fpca`] extracts spherical (sign-covariance) principal directions and
//!    orders them by a robust M-scale of the projected scores.
//! 3. [`regression`] regresses the response on the scores and their pairwise
//!    products with an S-estimator start followed by a bisquare MM-step, and
//!    maps the coefficients back to a slope curve and a quadratic kernel.
//!
//! [`simulation`] reproduces the contamination study used to benchmark the
//! estimator against least squares.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fpca;
pub mod funcspace;
pub mod linalg;
pub mod regression;
pub mod robust_center;
pub mod simulation;

pub use error::{FqrError, Result};
pub use fpca::{PcaBasis, PcaMethod};
pub use funcspace::{Curve, Grid, Surface};
pub use regression::{fit, predict, CoefVector, Design, FitMethod, FitOptions, FitResult, RhoConfig, Selection};
pub use simulation::{Contamination, ModelKind, ScenarioConfig, StudyReport, UpsilonChoice};
