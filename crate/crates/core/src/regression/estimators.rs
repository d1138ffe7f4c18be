//! Least-squares, S- and MM-regression on a score [`Design`].

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::design::{CoefVector, Design};
use super::rho::{m_scale, rho_sum, weight, RhoConfig};
use crate::error::{FqrError, Result};
use crate::linalg::{lstsq, solve_square, weighted_lstsq};

/// Default number of elemental subsamples in the S-step.
pub const DEFAULT_N_SUB: usize = 500;
/// IRLS steps applied to every elemental candidate before ranking.
const QUICK_STEPS: usize = 2;
/// Candidates carried into full refinement.
const N_BEST: usize = 5;
const S_REFINE_TOL: f64 = 1e-10;
const S_REFINE_MAX_ITER: usize = 500;
const MM_TOL: f64 = 1e-7;
const MM_MAX_ITER: usize = 500;
/// Redraw budget per requested subsample when elemental fits are singular.
const DRAW_BUDGET: usize = 20;
/// A residual scale this small relative to `max|y|` is an exact fit.
const EXACT_FIT_TOL: f64 = 1e-10;

/// S-regression coefficients and the minimized residual M-scale.
#[derive(Debug, Clone, PartialEq)]
pub struct SEstimate {
    pub coef: CoefVector,
    pub sigma: f64,
}

/// Ordinary least squares on `[1 | x | z]`; the scale is the residual RMS
/// with `n − (1 + p + q)` degrees of freedom.
pub fn ls_fit(d: &Design, y: &[f64]) -> Result<(CoefVector, f64)> {
    check_lengths(d, y)?;
    let k = d.n_coef();
    let n = d.n();
    if n <= k {
        return Err(FqrError::TooFewObservations { n, params: k });
    }
    let a = d.matrix();
    let beta = lstsq(&a, &DVector::from_column_slice(y))
        .ok_or_else(|| FqrError::SingularDesign("least-squares design is rank deficient".into()))?;
    let coef = CoefVector::from_vector(&beta, d.p());
    let rss: f64 = d.residuals(y, &coef).iter().map(|r| r * r).sum();
    Ok((coef, (rss / (n - k) as f64).sqrt()))
}

/// S-estimator: the coefficients minimizing the M-scale of the residuals
/// (divisor `n − (p + q)`), searched over random elemental fits refined by
/// IRLS plus the least-squares fit. Deterministic in `seed`.
pub fn s_estimate(d: &Design, y: &[f64], cfg: &RhoConfig, n_sub: usize, seed: u64) -> Result<SEstimate> {
    check_lengths(d, y)?;
    cfg.validate()?;
    if n_sub == 0 {
        return Err(FqrError::InvalidInput("n_sub must be at least 1".into()));
    }
    let n = d.n();
    let k = d.n_coef();
    if n <= k {
        return Err(FqrError::TooFewObservations { n, params: k });
    }
    let problem = SProblem {
        a: d.matrix(),
        y: DVector::from_column_slice(y),
        cfg: *cfg,
        dof: d.p() + d.q(),
        p: d.p(),
        exact_tol: EXACT_FIT_TOL * y.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut candidates: Vec<Candidate> = Vec::with_capacity(n_sub);
    let mut draws = 0usize;
    let mut index_buf = vec![0usize; k];
    while candidates.len() < n_sub && draws < DRAW_BUDGET * n_sub {
        draws += 1;
        for (slot, i) in index_buf.iter_mut().zip(index::sample(&mut rng, n, k)) {
            *slot = i;
        }
        index_buf.sort_unstable();
        let sub_a = problem.a.select_rows(index_buf.iter());
        let sub_y = problem.y.select_rows(index_buf.iter());
        let Some(beta) = solve_square(&sub_a, &sub_y) else { continue };
        let id = candidates.len();
        let cand = problem.refine(beta, QUICK_STEPS)?;
        candidates.push(Candidate { id, ..cand });
    }

    candidates.sort_by(|x, y| x.scale.total_cmp(&y.scale).then(x.id.cmp(&y.id)));
    candidates.truncate(N_BEST);

    let mut finalists = Vec::with_capacity(N_BEST + 1);
    for cand in candidates {
        let refined = problem.refine(cand.beta, S_REFINE_MAX_ITER)?;
        finalists.push(Candidate { id: cand.id, ..refined });
    }
    if let Some(beta) = lstsq(&problem.a, &problem.y) {
        let refined = problem.refine(beta, S_REFINE_MAX_ITER)?;
        finalists.push(Candidate { id: n_sub, ..refined });
    }

    let best = finalists
        .into_iter()
        .min_by(|x, y| x.scale.total_cmp(&y.scale).then(x.id.cmp(&y.id)))
        .ok_or_else(|| FqrError::SingularDesign("every elemental subsample was singular".into()))?;
    Ok(SEstimate { coef: CoefVector::from_vector(&best.beta, problem.p), sigma: best.scale })
}

struct Candidate {
    id: usize,
    beta: DVector<f64>,
    scale: f64,
}

struct SProblem {
    a: DMatrix<f64>,
    y: DVector<f64>,
    cfg: RhoConfig,
    dof: usize,
    p: usize,
    exact_tol: f64,
}

impl SProblem {
    fn residuals(&self, beta: &DVector<f64>) -> Vec<f64> {
        (&self.y - &self.a * beta).iter().copied().collect()
    }

    fn scale(&self, r: &[f64]) -> Result<f64> {
        let s = m_scale(r, &self.cfg, self.dof)?;
        Ok(if s <= self.exact_tol { 0.0 } else { s })
    }

    /// Up to `steps` S-type IRLS steps, each reweighting with the current
    /// M-scale; stops early once the scale stops decreasing.
    fn refine(&self, mut beta: DVector<f64>, steps: usize) -> Result<Candidate> {
        let mut r = self.residuals(&beta);
        let mut s = self.scale(&r)?;
        for _ in 0..steps {
            if s == 0.0 {
                break;
            }
            let w: Vec<f64> = r.iter().map(|&v| weight(v / s, self.cfg.c0)).collect();
            let Some(next) = weighted_lstsq(&self.a, &self.y, &w) else { break };
            let r_next = self.residuals(&next);
            let s_next = self.scale(&r_next)?;
            if s_next > s {
                break;
            }
            let improvement = (s - s_next) / s;
            beta = next;
            r = r_next;
            s = s_next;
            if improvement < S_REFINE_TOL {
                break;
            }
        }
        Ok(Candidate { id: 0, beta, scale: s })
    }
}

/// MM-step: IRLS for `argmin Σ ρ₁(r_i / σ)` started at `init`.
pub fn mm_fit(d: &Design, y: &[f64], sigma: f64, init: &CoefVector, cfg: &RhoConfig) -> Result<CoefVector> {
    check_lengths(d, y)?;
    if !(sigma > 0.0) {
        return Err(FqrError::InvalidInput(format!("MM scale must be positive, got {sigma}")));
    }
    if init.p() != d.p() {
        return Err(FqrError::InvalidInput("initial coefficients do not match the design".into()));
    }
    let r0 = d.residuals(y, init);
    if r0.iter().all(|&v| v == 0.0) {
        return Ok(init.clone());
    }
    let a = d.matrix();
    let yv = DVector::from_column_slice(y);
    let mut beta = init.to_vector();
    let mut r = r0.clone();
    for _ in 0..MM_MAX_ITER {
        let w: Vec<f64> = r.iter().map(|&v| weight(v / sigma, cfg.c1)).collect();
        let next = weighted_lstsq(&a, &yv, &w)
            .ok_or_else(|| FqrError::SingularDesign("weighted normal equations are singular".into()))?;
        let change = (&next - &beta).amax();
        let size = beta.amax().max(next.amax());
        beta = next;
        r = (&yv - &a * &beta).iter().copied().collect();
        if change <= MM_TOL * size {
            let out = CoefVector::from_vector(&beta, d.p());
            // IRLS is monotone; guard against round-off at a flat optimum.
            if rho_sum(&r, sigma, cfg.c1) > rho_sum(&r0, sigma, cfg.c1) {
                return Ok(init.clone());
            }
            return Ok(out);
        }
    }
    Err(FqrError::MmNotConverged { iterations: MM_MAX_ITER, last: Box::new(CoefVector::from_vector(&beta, d.p())) })
}

fn check_lengths(d: &Design, y: &[f64]) -> Result<()> {
    if d.n() != y.len() {
        return Err(FqrError::InvalidInput(format!("design has {} rows but {} responses were given", d.n(), y.len())));
    }
    Ok(())
}
