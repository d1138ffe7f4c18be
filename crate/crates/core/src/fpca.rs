//! Classical and spherical functional principal components.
//!
//! Kernels are discretized as `W^{1/2} K W^{1/2}` (with `W` the quadrature
//! weights) so that the eigenvectors mapped back through `W^{-1/2}` are
//! orthonormal under the quadrature inner product.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{FqrError, Result};
use crate::funcspace::{common_grid, inner_product, same_grid, weighted_dot, Curve, Grid, Surface};
use crate::regression::rho::{m_scale, RhoConfig};
use crate::robust_center::{spatial_median, SpatialMedianOptions, COINCIDENCE_TOL};

/// Relative asymmetry tolerated by [`eigen_directions`].
const SYMMETRY_TOL: f64 = 1e-10;
/// Slack when comparing cumulative variance fractions against a threshold.
const FRACTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PcaMethod {
    Classical,
    Spherical,
}

impl fmt::Display for PcaMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PcaMethod::Classical => "classical",
            PcaMethod::Spherical => "spherical",
        })
    }
}

impl FromStr for PcaMethod {
    type Err = FqrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "classical" => Ok(PcaMethod::Classical),
            "spherical" => Ok(PcaMethod::Spherical),
            other => Err(FqrError::InvalidInput(format!("unknown PCA method '{other}'"))),
        }
    }
}

/// Center, ordered principal directions and their variance scales.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaBasis {
    center: Curve,
    directions: Vec<Curve>,
    scales: Vec<f64>,
    method: PcaMethod,
}

impl PcaBasis {
    /// Validates lengths, grids and that `scales` are non-negative and
    /// non-increasing.
    pub fn new(center: Curve, directions: Vec<Curve>, scales: Vec<f64>, method: PcaMethod) -> Result<PcaBasis> {
        if directions.is_empty() || directions.len() != scales.len() {
            return Err(FqrError::InvalidInput(format!("{} directions but {} scales", directions.len(), scales.len())));
        }
        for d in &directions {
            if !same_grid(center.grid(), d.grid()) {
                return Err(FqrError::GridMismatch);
            }
        }
        if scales.iter().any(|s| !(*s >= 0.0)) {
            return Err(FqrError::InvalidInput("scales must be non-negative".into()));
        }
        if scales.windows(2).any(|w| w[1] > w[0]) {
            return Err(FqrError::InvalidInput("scales must be non-increasing".into()));
        }
        Ok(PcaBasis { center, directions, scales, method })
    }

    pub fn center(&self) -> &Curve {
        &self.center
    }

    pub fn directions(&self) -> &[Curve] {
        &self.directions
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn method(&self) -> PcaMethod {
        self.method
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.center.grid()
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// The first `p` directions and scales.
    pub fn truncated(&self, p: usize) -> Result<PcaBasis> {
        self.check_p(p)?;
        Ok(PcaBasis {
            center: self.center.clone(),
            directions: self.directions[..p].to_vec(),
            scales: self.scales[..p].to_vec(),
            method: self.method,
        })
    }

    /// Coordinates `⟨μ̂, φ̂_j⟩` of the center for `j < p`.
    pub fn center_scores(&self, p: usize) -> Result<Vec<f64>> {
        self.check_p(p)?;
        self.directions[..p].iter().map(|phi| inner_product(&self.center, phi)).collect()
    }

    fn check_p(&self, p: usize) -> Result<()> {
        if p == 0 || p > self.directions.len() {
            return Err(FqrError::OutOfRange(format!("p = {p} (basis has {} directions)", self.directions.len())));
        }
        Ok(())
    }
}

/// Stacks the deviations `X_i − center` as rows of an n×M matrix.
fn deviations(sample: &[Curve], center: &Curve) -> Result<DMatrix<f64>> {
    let grid = common_grid(sample)?;
    if !same_grid(&grid, center.grid()) {
        return Err(FqrError::GridMismatch);
    }
    let m = grid.len();
    let c = center.values();
    Ok(DMatrix::from_fn(sample.len(), m, |i, k| sample[i].values()[k] - c[k]))
}

/// `k[m,l] = (1/n) Σ_i (X_i − c)[m] (X_i − c)[l]`.
pub fn sample_covariance(sample: &[Curve], center: &Curve) -> Result<Surface> {
    if sample.len() < 2 {
        return Err(FqrError::InvalidInput(format!("covariance needs at least 2 curves, got {}", sample.len())));
    }
    let dev = deviations(sample, center)?;
    let k = dev.tr_mul(&dev) / sample.len() as f64;
    Surface::new(center.grid().clone(), symmetric_part(k))
}

/// Covariance of the centered curves projected onto the unit sphere. Curves
/// within `1e-12 · (1 + ‖center‖)` of the center are dropped.
pub fn sign_covariance(sample: &[Curve], center: &Curve) -> Result<Surface> {
    if sample.len() < 2 {
        return Err(FqrError::InvalidInput(format!("sign covariance needs at least 2 curves, got {}", sample.len())));
    }
    let mut dev = deviations(sample, center)?;
    let w = center.grid().weights();
    let threshold = COINCIDENCE_TOL * (1.0 + center.norm());
    let mut kept = Vec::with_capacity(sample.len());
    for i in 0..dev.nrows() {
        let row: Vec<f64> = dev.row(i).iter().copied().collect();
        let norm = weighted_dot(w, &row, &row).sqrt();
        if norm >= threshold {
            dev.row_mut(i).unscale_mut(norm);
            kept.push(i);
        }
    }
    if kept.is_empty() {
        return Err(FqrError::DegenerateSample("every curve coincides with the center".into()));
    }
    let dropped = sample.len() - kept.len();
    if dropped > 0 {
        log::warn!("sign covariance: dropped {dropped} curve(s) coinciding with the center");
    }
    let y = dev.select_rows(kept.iter());
    let k = y.tr_mul(&y) / kept.len() as f64;
    Surface::new(center.grid().clone(), symmetric_part(k))
}

fn symmetric_part(k: DMatrix<f64>) -> DMatrix<f64> {
    (&k + k.transpose()) * 0.5
}

/// Leading `m` eigenpairs of the integral operator with kernel `k`.
///
/// Directions are quadrature-normalized and signed so that their entry of
/// largest magnitude (earliest on ties) is positive.
pub fn eigen_directions(k: &Surface, m: usize) -> Result<(Vec<Curve>, Vec<f64>)> {
    let grid = k.grid();
    let size = grid.len();
    if m == 0 || m > size {
        return Err(FqrError::OutOfRange(format!("m = {m} (grid has {size} points)")));
    }
    if !k.is_symmetric(SYMMETRY_TOL) {
        return Err(FqrError::AsymmetricKernel { max_deviation: k.asymmetry() });
    }
    let sw: Vec<f64> = grid.weights().iter().map(|w| w.sqrt()).collect();
    let kv = k.values();
    let a = DMatrix::from_fn(size, size, |i, j| sw[i] * kv[(i, j)] * sw[j]);
    let eig = symmetric_part(a).symmetric_eigen();

    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));

    let mut directions = Vec::with_capacity(m);
    let mut values = Vec::with_capacity(m);
    for &idx in order.iter().take(m) {
        let v = eig.eigenvectors.column(idx);
        let mut phi: Vec<f64> = (0..size).map(|i| v[i] / sw[i]).collect();
        let norm = weighted_dot(grid.weights(), &phi, &phi).sqrt();
        let lead = phi
            .iter()
            .enumerate()
            .fold((0usize, 0.0_f64), |best, (i, x)| if x.abs() > best.1 { (i, x.abs()) } else { best })
            .0;
        let sign = if phi[lead] < 0.0 { -1.0 } else { 1.0 };
        for x in phi.iter_mut() {
            *x *= sign / norm;
        }
        directions.push(Curve::new(grid.clone(), phi)?);
        values.push(eig.eigenvalues[idx]);
    }
    Ok((directions, values))
}

/// Squared bisquare M-scale of the scores (normal-consistent, no
/// degrees-of-freedom correction).
pub fn robust_scale_of_scores(scores: &[f64]) -> Result<f64> {
    if scores.len() < 2 {
        return Err(FqrError::InvalidInput(format!("robust scale needs at least 2 scores, got {}", scores.len())));
    }
    let s = m_scale(scores, &RhoConfig::default(), 0)?;
    Ok(s * s)
}

/// Estimates a basis of `m` directions.
///
/// `Classical` centers at the pointwise mean and uses covariance eigenvalues
/// as scales. `Spherical` centers at the spatial median, takes directions
/// from the sign covariance, measures each by the robust scale of its scores
/// and re-sorts by that scale. `center` overrides either center.
pub fn build_basis(sample: &[Curve], method: PcaMethod, m: usize, center: Option<&Curve>) -> Result<PcaBasis> {
    if sample.len() < 2 {
        return Err(FqrError::InvalidInput(format!("a basis needs at least 2 curves, got {}", sample.len())));
    }
    let grid = common_grid(sample)?;
    match method {
        PcaMethod::Classical => {
            let center = match center {
                Some(c) => c.clone(),
                None => pointwise_mean(sample, &grid)?,
            };
            let k = sample_covariance(sample, &center)?;
            if !(k.weighted_trace() > 0.0) {
                return Err(FqrError::DegenerateSample("the sample has no variability".into()));
            }
            let (directions, values) = eigen_directions(&k, m)?;
            let scales = values.into_iter().map(|v| v.max(0.0)).collect();
            PcaBasis::new(center, directions, scales, method)
        }
        PcaMethod::Spherical => {
            let center = match center {
                Some(c) => c.clone(),
                None => {
                    let opts = SpatialMedianOptions::default();
                    spatial_median(sample, opts.tol, opts.max_iter)?
                }
            };
            let k = sign_covariance(sample, &center)?;
            let (directions, _) = eigen_directions(&k, m)?;
            let dev = deviations(sample, &center)?;
            let w = grid.weights();
            let mut ranked = Vec::with_capacity(m);
            for (j, phi) in directions.into_iter().enumerate() {
                let wphi: Vec<f64> = phi.values().iter().zip(w).map(|(a, b)| a * b).collect();
                let scores: Vec<f64> =
                    (0..dev.nrows()).map(|i| dev.row(i).iter().zip(&wphi).map(|(a, b)| a * b).sum()).collect();
                ranked.push((robust_scale_of_scores(&scores)?, j, phi));
            }
            ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let (scales, directions) = ranked.into_iter().map(|(s, _, phi)| (s, phi)).unzip();
            PcaBasis::new(center, directions, scales, method)
        }
    }
}

fn pointwise_mean(sample: &[Curve], grid: &Arc<Grid>) -> Result<Curve> {
    let n = sample.len() as f64;
    let mut mean = vec![0.0; grid.len()];
    for c in sample {
        for (m, v) in mean.iter_mut().zip(c.values()) {
            *m += v;
        }
    }
    Curve::new(grid.clone(), mean.into_iter().map(|v| v / n).collect())
}

/// Smallest `p` whose leading scales explain at least `threshold` of the total.
pub fn select_dimension(scales: &[f64], threshold: f64) -> Result<usize> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(FqrError::InvalidInput(format!("threshold must lie in (0, 1], got {threshold}")));
    }
    if scales.iter().any(|s| !(*s >= 0.0)) {
        return Err(FqrError::InvalidInput("scales must be non-negative".into()));
    }
    let total: f64 = scales.iter().sum();
    if !(total > 0.0) {
        return Err(FqrError::DegenerateSample("all scales are zero".into()));
    }
    let mut cumulative = 0.0;
    for (j, s) in scales.iter().enumerate() {
        cumulative += s;
        if cumulative / total >= threshold - FRACTION_TOL {
            return Ok(j + 1);
        }
    }
    Ok(scales.len())
}

/// Centered scores `ξ̂_ij = ⟨X_i − μ̂, φ̂_j⟩` for the first `p` directions.
pub fn project_scores(sample: &[Curve], basis: &PcaBasis, p: usize) -> Result<DMatrix<f64>> {
    basis.check_p(p)?;
    if sample.is_empty() {
        return Err(FqrError::EmptySample);
    }
    let dev = deviations(sample, basis.center())?;
    let w = basis.grid().weights();
    let size = w.len();
    let phi = DMatrix::from_fn(size, p, |k, j| w[k] * basis.directions()[j].values()[k]);
    Ok(dev * phi)
}
