//! Sample spatial median of a set of curves.

use crate::error::{FqrError, Result};
use crate::funcspace::{common_grid, weighted_dot, Curve};

/// Curves closer than this (relative to `1 + ‖X_i‖`) to the current iterate
/// are treated as coincident with it.
pub const COINCIDENCE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct SpatialMedianOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SpatialMedianOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 500 }
    }
}

/// `Σ_i (‖X_i − θ‖ − ‖X_i‖)`, the objective minimized by the spatial median.
pub fn spatial_median_objective(sample: &[Curve], theta: &Curve) -> Result<f64> {
    let mut total = 0.0;
    for x in sample {
        total += x.sub(theta)?.norm() - x.norm();
    }
    Ok(total)
}

/// Modified Weiszfeld iteration (Vardi–Zhang) for
/// `argmin_θ Σ_i (‖X_i − θ‖ − ‖X_i‖)`, started at the pointwise median.
///
/// Converges when the norm of the sum of unit vectors `(X_i − θ)/‖X_i − θ‖`
/// over non-coincident curves is at most `tol · n`, or when `θ` sits on data
/// points whose multiplicity dominates the pull of the remaining curves.
pub fn spatial_median(sample: &[Curve], tol: f64, max_iter: usize) -> Result<Curve> {
    if sample.is_empty() {
        return Err(FqrError::EmptySample);
    }
    if !(tol > 0.0) {
        return Err(FqrError::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let grid = common_grid(sample)?;
    let w = grid.weights();
    let n = sample.len();
    let m = grid.len();
    let data: Vec<&[f64]> = sample.iter().map(|c| c.values()).collect();
    let data_norms: Vec<f64> = data.iter().map(|x| weighted_dot(w, x, x).sqrt()).collect();

    let mut theta = pointwise_median(&data, m);
    let mut diff = vec![0.0; m];
    let mut gradient_norm = f64::INFINITY;

    for _ in 0..max_iter {
        let mut weighted_sum = vec![0.0; m];
        let mut unit_sum = vec![0.0; m];
        let mut inv_total = 0.0;
        let mut coincident = 0usize;
        for (x, &xn) in data.iter().zip(&data_norms) {
            for k in 0..m {
                diff[k] = x[k] - theta[k];
            }
            let dist = weighted_dot(w, &diff, &diff).sqrt();
            if dist < COINCIDENCE_TOL * (1.0 + xn) {
                coincident += 1;
                continue;
            }
            let inv = 1.0 / dist;
            inv_total += inv;
            for k in 0..m {
                weighted_sum[k] += x[k] * inv;
                unit_sum[k] += diff[k] * inv;
            }
        }
        gradient_norm = weighted_dot(w, &unit_sum, &unit_sum).sqrt();
        if inv_total == 0.0 {
            // Every curve coincides with θ.
            gradient_norm = 0.0;
            break;
        }
        if gradient_norm <= tol * n as f64 {
            break;
        }
        if coincident > 0 && gradient_norm <= coincident as f64 {
            // θ is a data point and the subgradient condition holds there.
            break;
        }
        let eta = coincident as f64;
        let pull = if coincident > 0 { (eta / gradient_norm).min(1.0) } else { 0.0 };
        for k in 0..m {
            let weiszfeld = weighted_sum[k] / inv_total;
            theta[k] = (1.0 - pull) * weiszfeld + pull * theta[k];
        }
        gradient_norm = f64::INFINITY;
    }

    let out = Curve::new(grid.clone(), theta)?;
    if gradient_norm.is_finite() {
        Ok(out)
    } else {
        let final_grad = final_gradient(&data, w, out.values());
        Err(FqrError::SpatialMedianNotConverged {
            iterations: max_iter,
            gradient_norm: final_grad,
            last: Box::new(out),
        })
    }
}

fn final_gradient(data: &[&[f64]], w: &[f64], theta: &[f64]) -> f64 {
    let m = theta.len();
    let mut unit_sum = vec![0.0; m];
    for x in data {
        let diff: Vec<f64> = x.iter().zip(theta).map(|(a, b)| a - b).collect();
        let dist = weighted_dot(w, &diff, &diff).sqrt();
        if dist > 0.0 {
            for k in 0..m {
                unit_sum[k] += diff[k] / dist;
            }
        }
    }
    weighted_dot(w, &unit_sum, &unit_sum).sqrt()
}

fn pointwise_median(data: &[&[f64]], m: usize) -> Vec<f64> {
    let mut column = Vec::with_capacity(data.len());
    (0..m)
        .map(|k| {
            column.clear();
            column.extend(data.iter().map(|x| x[k]));
            median_in_place(&mut column)
        })
        .collect()
}

pub(crate) fn median_in_place(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
