use thiserror::Error;

use crate::funcspace::Curve;
use crate::regression::CoefVector;

pub type Result<T> = std::result::Result<T, FqrError>;

#[derive(Debug, Error)]
pub enum FqrError {
    #[error("curves are defined on different grids")]
    GridMismatch,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("unsupported grid: {0}")]
    UnsupportedGrid(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty sample")]
    EmptySample,

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("kernel is not symmetric (max deviation {max_deviation:e})")]
    AsymmetricKernel { max_deviation: f64 },

    #[error("{0} out of range")]
    OutOfRange(String),

    #[error("need more than {params} observations, got {n}")]
    TooFewObservations { n: usize, params: usize },

    #[error("singular design: {0}")]
    SingularDesign(String),

    #[error("spatial median did not converge after {iterations} iterations (gradient norm {gradient_norm:e})")]
    SpatialMedianNotConverged { iterations: usize, gradient_norm: f64, last: Box<Curve> },

    #[error("MM iterations did not converge after {iterations} iterations")]
    MmNotConverged { iterations: usize, last: Box<CoefVector> },

    #[error("study failed: {failures} of {reps} replications failed for {estimator}")]
    StudyFailed { estimator: String, failures: usize, reps: usize },

    #[error("report serialization failed: {0}")]
    Serialization(String),
}
