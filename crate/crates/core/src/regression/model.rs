//! End-to-end fitting of the centered quadratic model
//! `y = α + ⟨β, X − μ⟩ + ⟨X − μ, Υ (X − μ)⟩ + ε` on estimated principal scores.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::design::{build_design, n_quadratic, CoefVector};
use super::estimators::{ls_fit, mm_fit, s_estimate, DEFAULT_N_SUB};
use super::rho::{weight, RhoConfig};
use crate::error::{FqrError, Result};
use crate::fpca::{build_basis, project_scores, select_dimension, PcaBasis, PcaMethod};
use crate::funcspace::{inner_product, quadratic_form, same_grid, Curve, Surface};

/// Seed used when none is supplied.
pub const DEFAULT_SEED: u64 = 20240101;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMethod {
    /// Classical principal components and least squares.
    Ls,
    /// Spherical principal components and an S-started MM-estimator.
    Mm,
}

impl FitMethod {
    pub fn pca_method(self) -> PcaMethod {
        match self {
            FitMethod::Ls => PcaMethod::Classical,
            FitMethod::Mm => PcaMethod::Spherical,
        }
    }
}

impl fmt::Display for FitMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitMethod::Ls => "ls",
            FitMethod::Mm => "mm",
        })
    }
}

impl FromStr for FitMethod {
    type Err = FqrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ls" => Ok(FitMethod::Ls),
            "mm" => Ok(FitMethod::Mm),
            other => Err(FqrError::InvalidInput(format!("unknown fit method '{other}'"))),
        }
    }
}

/// How many principal directions enter the regression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Selection {
    Fixed(usize),
    /// Smallest `p` explaining this fraction of the total scale.
    VarFrac(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub method: FitMethod,
    pub selection: Selection,
    pub cfg: RhoConfig,
    pub n_sub: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            method: FitMethod::Mm,
            selection: Selection::VarFrac(0.9),
            cfg: RhoConfig::default(),
            n_sub: DEFAULT_N_SUB,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// Intercept of the centered model.
    pub alpha: f64,
    /// Slope of the centered model, `β̂* = β̂ + 2Υ̂μ̂`.
    pub beta: Curve,
    pub upsilon: Surface,
    /// Intercept of the uncentered model `y = α + ⟨β, X⟩ + ⟨X, ΥX⟩`.
    pub alpha_uncentered: f64,
    /// Slope of the uncentered model; the estimate of `β` when `E X ≠ μ̂`.
    pub beta_uncentered: Curve,
    /// Residual scale: the S-scale for `Mm`, the dof-corrected RMS for `Ls`.
    pub sigma: f64,
    /// Coefficients of the centered model.
    pub coef: CoefVector,
    /// Center and the `p` directions actually used.
    pub basis: PcaBasis,
    pub p: usize,
    /// Centered scores, n×p, in input order.
    pub scores: DMatrix<f64>,
    pub residuals: Vec<f64>,
    /// Final IRLS weights (all 1 for least squares or an exact fit).
    pub weights: Vec<f64>,
    pub method: FitMethod,
    /// S-estimate the MM-step started from.
    pub s_coef: Option<CoefVector>,
    /// `⟨μ̂, φ̂_j⟩`, the coordinates of the center.
    pub mu_scores: Vec<f64>,
}

impl FitResult {
    /// Coefficients of the uncentered model in the scores `⟨X, φ̂_j⟩`.
    pub fn uncentered_coef(&self) -> CoefVector {
        from_centered_with(&self.coef, &self.mu_scores)
    }
}

/// `β = Σ b_j φ̂_j` and `Υ = Σ_{j,ℓ} v_jℓ φ̂_j ⊗ φ̂_ℓ` over the first `p` directions.
pub fn assemble(coef: &CoefVector, basis: &PcaBasis, p: usize) -> Result<(Curve, Surface)> {
    check_coef(coef, basis, p)?;
    let grid = basis.grid().clone();
    let m = grid.len();
    let phi = DMatrix::from_fn(m, p, |k, j| basis.directions()[j].values()[k]);
    let beta = &phi * nalgebra::DVector::from_column_slice(&coef.b);
    let k = &phi * coef.v_matrix() * phi.transpose();
    let k = (&k + k.transpose()) * 0.5;
    Ok((Curve::new(grid.clone(), beta.iter().copied().collect())?, Surface::new(grid, k)?))
}

fn check_coef(coef: &CoefVector, basis: &PcaBasis, p: usize) -> Result<()> {
    if coef.p() != p || coef.u.len() != n_quadratic(p) {
        return Err(FqrError::InvalidInput(format!("coefficients have p = {} but p = {p} was requested", coef.p())));
    }
    if p == 0 || p > basis.len() {
        return Err(FqrError::OutOfRange(format!("p = {p} (basis has {} directions)", basis.len())));
    }
    Ok(())
}

/// Maps uncentered coefficients `(a, b, u)` to the centered `(a*, b*, u)`:
/// `a* = a + bᵀμ + μᵀVμ`, `b* = b + 2Vμ` with `μ_j = ⟨μ̂, φ̂_j⟩`.
pub fn to_centered(coef: &CoefVector, basis: &PcaBasis, p: usize) -> Result<CoefVector> {
    check_coef(coef, basis, p)?;
    Ok(to_centered_with(coef, &basis.center_scores(p)?))
}

/// Inverse of [`to_centered`].
pub fn from_centered(coef: &CoefVector, basis: &PcaBasis, p: usize) -> Result<CoefVector> {
    check_coef(coef, basis, p)?;
    Ok(from_centered_with(coef, &basis.center_scores(p)?))
}

fn quadratic_terms(coef: &CoefVector, mu: &[f64]) -> (Vec<f64>, f64) {
    let v = coef.v_matrix();
    let p = mu.len();
    let v_mu: Vec<f64> = (0..p).map(|j| (0..p).map(|l| v[(j, l)] * mu[l]).sum()).collect();
    let mu_v_mu = mu.iter().zip(&v_mu).map(|(a, b)| a * b).sum();
    (v_mu, mu_v_mu)
}

pub(crate) fn to_centered_with(coef: &CoefVector, mu: &[f64]) -> CoefVector {
    let (v_mu, mu_v_mu) = quadratic_terms(coef, mu);
    let b_mu: f64 = coef.b.iter().zip(mu).map(|(b, m)| b * m).sum();
    CoefVector {
        a: coef.a + b_mu + mu_v_mu,
        b: coef.b.iter().zip(&v_mu).map(|(b, vm)| b + 2.0 * vm).collect(),
        u: coef.u.clone(),
    }
}

pub(crate) fn from_centered_with(coef: &CoefVector, mu: &[f64]) -> CoefVector {
    let (v_mu, mu_v_mu) = quadratic_terms(coef, mu);
    let b: Vec<f64> = coef.b.iter().zip(&v_mu).map(|(b, vm)| b - 2.0 * vm).collect();
    let b_mu: f64 = b.iter().zip(mu).map(|(b, m)| b * m).sum();
    CoefVector { a: coef.a - b_mu - mu_v_mu, b, u: coef.u.clone() }
}

/// Orders observations by curve values, then response, so every downstream
/// floating-point reduction is independent of the input order. Curves come
/// first so that affine maps of the response leave the order unchanged.
fn canonical_order(sample: &[Curve], y: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..y.len()).collect();
    idx.sort_by(|&i, &j| {
        sample[i]
            .values()
            .iter()
            .zip(sample[j].values())
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
            .then_with(|| y[i].total_cmp(&y[j]))
            .then(i.cmp(&j))
    });
    idx
}

/// Fits the centered quadratic model: principal directions (classical for
/// `Ls`, spherical for `Mm`), dimension selection, score design, then least
/// squares or S + MM regression.
pub fn fit(sample: &[Curve], y: &[f64], opts: &FitOptions) -> Result<FitResult> {
    let n = sample.len();
    if n != y.len() {
        return Err(FqrError::InvalidInput(format!("{n} curves but {} responses", y.len())));
    }
    if n < 2 {
        return Err(FqrError::TooFewObservations { n, params: 2 });
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(FqrError::InvalidInput(format!("response {i} is not finite")));
    }
    opts.cfg.validate()?;

    let order = canonical_order(sample, y);
    let sorted: Vec<Curve> = order.iter().map(|&i| sample[i].clone()).collect();
    let y_sorted: Vec<f64> = order.iter().map(|&i| y[i]).collect();

    let m = sorted[0].len().min(n);
    let full = build_basis(&sorted, opts.method.pca_method(), m, None)?;
    let p = match opts.selection {
        Selection::Fixed(p) => p,
        Selection::VarFrac(f) => select_dimension(full.scales(), f)?,
    };
    if p == 0 || p > full.len() {
        return Err(FqrError::OutOfRange(format!("p = {p} (at most {} directions)", full.len())));
    }
    let params = 1 + p + n_quadratic(p);
    if n <= params {
        return Err(FqrError::TooFewObservations { n, params });
    }
    let basis = full.truncated(p)?;
    let scores = project_scores(&sorted, &basis, p)?;
    let design = build_design(&scores, true)?;

    let (coef, sigma, s_coef) = match opts.method {
        FitMethod::Ls => {
            let (coef, sigma) = ls_fit(&design, &y_sorted)?;
            (coef, sigma, None)
        }
        FitMethod::Mm => {
            let s = s_estimate(&design, &y_sorted, &opts.cfg, opts.n_sub, opts.seed)?;
            let coef =
                if s.sigma > 0.0 { mm_fit(&design, &y_sorted, s.sigma, &s.coef, &opts.cfg)? } else { s.coef.clone() };
            (coef, s.sigma, Some(s.coef))
        }
    };

    let (beta, upsilon) = assemble(&coef, &basis, p)?;
    let mu_scores = basis.center_scores(p)?;
    let raw = from_centered_with(&coef, &mu_scores);
    let (beta_uncentered, _) = assemble(&raw, &basis, p)?;
    let mut result = FitResult {
        alpha: coef.a,
        beta,
        upsilon,
        alpha_uncentered: raw.a,
        beta_uncentered,
        sigma,
        coef,
        basis,
        p,
        scores: DMatrix::zeros(n, p),
        residuals: vec![0.0; n],
        weights: vec![1.0; n],
        method: opts.method,
        s_coef,
        mu_scores,
    };

    for (pos, &i) in order.iter().enumerate() {
        result.scores.set_row(i, &scores.row(pos));
    }
    for i in 0..n {
        result.residuals[i] = y[i] - predict(&result, &sample[i])?;
    }
    if opts.method == FitMethod::Mm && sigma > 0.0 {
        for (w, r) in result.weights.iter_mut().zip(&result.residuals) {
            *w = weight(r / sigma, opts.cfg.c1);
        }
    }
    Ok(result)
}

/// `α̂ + ⟨x − μ̂, β̂⟩ + ⟨x − μ̂, Υ̂ (x − μ̂)⟩`.
pub fn predict(fit: &FitResult, x: &Curve) -> Result<f64> {
    if !same_grid(x.grid(), fit.beta.grid()) {
        return Err(FqrError::GridMismatch);
    }
    let dev = x.sub(fit.basis.center())?;
    Ok(fit.alpha + inner_product(&dev, &fit.beta)? + quadratic_form(&fit.upsilon, &dev)?)
}
