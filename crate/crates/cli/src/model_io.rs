//! JSON form of a fitted model and an offline predictor that works from it.

use std::sync::Arc;

use fqr_core::funcspace::{derivative, inner_product, quadratic_form};
use fqr_core::{Curve, FitResult, FqrError, Grid, Surface};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::outliers::{boxplot_fences, Flagged};
use crate::table::AffineMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveJson {
    pub t: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceJson {
    pub t: Vec<f64>,
    /// Row-major values: `rows[i][j] = υ(t_i, t_j)`.
    pub rows: Vec<Vec<f64>>,
}

/// Serialized fit. `beta`, `upsilon` and `alpha` belong to the centered
/// model `y = α + ⟨X − μ̂, β⟩ + ⟨X − μ̂, Υ(X − μ̂)⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitJson {
    pub alpha: f64,
    pub sigma: f64,
    pub p: usize,
    pub method: String,
    pub b: Vec<f64>,
    pub u: Vec<f64>,
    pub mu_scores: Vec<f64>,
    pub beta: CurveJson,
    pub upsilon: SurfaceJson,
    pub residuals: Vec<f64>,
    pub weights: Vec<f64>,
    pub outliers: Vec<Flagged>,
    pub center: CurveJson,
    pub alpha_uncentered: f64,
    pub beta_uncentered: CurveJson,
    pub response: String,
    pub derivative: u8,
    /// Map from the input abscissae to the grid `t`.
    pub abscissa_map: AffineMap,
    pub ids: Vec<String>,
    pub fences: [f64; 2],
}

fn curve_json(c: &Curve) -> CurveJson {
    CurveJson { t: c.grid().points().to_vec(), v: c.values().to_vec() }
}

impl FitJson {
    pub fn from_fit(
        fit: &FitResult,
        ids: &[String],
        response: &str,
        derivative: u8,
        abscissa_map: AffineMap,
    ) -> FitJson {
        let m = fit.upsilon.grid().len();
        let ups = fit.upsilon.values();
        let fences = boxplot_fences(&fit.residuals);
        FitJson {
            alpha: fit.alpha,
            sigma: fit.sigma,
            p: fit.p,
            method: fit.method.to_string(),
            b: fit.coef.b.clone(),
            u: fit.coef.u.clone(),
            mu_scores: fit.mu_scores.clone(),
            beta: curve_json(&fit.beta),
            upsilon: SurfaceJson {
                t: fit.upsilon.grid().points().to_vec(),
                rows: (0..m).map(|i| (0..m).map(|j| ups[(i, j)]).collect()).collect(),
            },
            residuals: fit.residuals.clone(),
            weights: fit.weights.clone(),
            outliers: crate::outliers::flag(&fit.residuals, ids, fences),
            center: curve_json(fit.basis.center()),
            alpha_uncentered: fit.alpha_uncentered,
            beta_uncentered: curve_json(&fit.beta_uncentered),
            response: response.to_string(),
            derivative,
            abscissa_map,
            ids: ids.to_vec(),
            fences: [fences.0, fences.1],
        }
    }
}

/// Predictor rebuilt from a [`FitJson`] alone.
#[derive(Debug, Clone)]
pub struct OfflineModel {
    grid: Arc<Grid>,
    alpha: f64,
    center: Curve,
    beta: Curve,
    upsilon: Surface,
    derivative: bool,
    map: AffineMap,
}

impl OfflineModel {
    pub fn from_json(j: &FitJson) -> fqr_core::Result<OfflineModel> {
        let m = j.beta.t.len();
        let consistent = j.beta.v.len() == m
            && j.center.t == j.beta.t
            && j.center.v.len() == m
            && j.upsilon.t == j.beta.t
            && j.upsilon.rows.len() == m
            && j.upsilon.rows.iter().all(|r| r.len() == m);
        if !consistent {
            return Err(FqrError::InvalidInput("model file has inconsistent grid sizes".into()));
        }
        let grid = Arc::new(Grid::from_points(j.beta.t.clone())?);
        let ups = DMatrix::from_fn(m, m, |r, c| j.upsilon.rows[r][c]);
        Ok(OfflineModel {
            alpha: j.alpha,
            center: Curve::new(grid.clone(), j.center.v.clone())?,
            beta: Curve::new(grid.clone(), j.beta.v.clone())?,
            upsilon: Surface::new(grid.clone(), ups)?,
            derivative: j.derivative == 1,
            map: j.abscissa_map,
            grid,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn uses_derivative(&self) -> bool {
        self.derivative
    }

    pub fn abscissa_map(&self) -> AffineMap {
        self.map
    }

    /// Prediction for a curve on the model grid, after the same
    /// preprocessing the fit used.
    pub fn predict_raw(&self, x: &Curve) -> fqr_core::Result<f64> {
        let x = if self.derivative { derivative(x)? } else { x.clone() };
        self.predict_preprocessed(&x)
    }

    pub fn predict_preprocessed(&self, x: &Curve) -> fqr_core::Result<f64> {
        let d = x.sub(&self.center)?;
        Ok(self.alpha + inner_product(&d, &self.beta)? + quadratic_form(&self.upsilon, &d)?)
    }
}
