//! Discretized `L²(0, 1)`: grids with trapezoid weights, curves, bivariate
//! kernels, and the quadrature forms built on them.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{FqrError, Result};

/// Relative tolerance used to decide whether a grid is equally spaced.
const UNIFORM_TOL: f64 = 1e-8;

/// Ordered abscissae in `[0, 1]` with composite trapezoid weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid {
    /// `m` equally spaced points `0, 1/(m-1), ..., 1`.
    pub fn uniform(m: usize) -> Result<Arc<Grid>> {
        if m < 2 {
            return Err(FqrError::InvalidGrid(format!("need at least 2 points, got {m}")));
        }
        let step = 1.0 / (m - 1) as f64;
        let points = (0..m).map(|i| i as f64 * step).collect();
        Ok(Arc::new(Self::from_points(points)?))
    }

    /// Trapezoid weights for arbitrary strictly increasing points in `[0, 1]`.
    pub fn from_points(points: Vec<f64>) -> Result<Grid> {
        let m = points.len();
        if m < 2 {
            return Err(FqrError::InvalidGrid(format!("need at least 2 points, got {m}")));
        }
        if let Some(bad) = points.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(FqrError::InvalidGrid(format!("point {bad} outside [0, 1]")));
        }
        if let Some(i) = points.windows(2).position(|w| w[1] <= w[0]) {
            return Err(FqrError::InvalidGrid(format!("points not strictly increasing at index {}", i + 1)));
        }
        let mut weights = vec![0.0; m];
        for i in 0..m - 1 {
            let half = 0.5 * (points[i + 1] - points[i]);
            weights[i] += half;
            weights[i + 1] += half;
        }
        Ok(Grid { points, weights })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Common spacing if the grid is equally spaced.
    pub fn spacing(&self) -> Option<f64> {
        let m = self.points.len();
        let step = (self.points[m - 1] - self.points[0]) / (m - 1) as f64;
        let uniform = self.points.windows(2).all(|w| ((w[1] - w[0]) - step).abs() <= UNIFORM_TOL * step);
        uniform.then_some(step)
    }

    pub fn is_uniform(&self) -> bool {
        self.spacing().is_some()
    }
}

/// True when both handles describe the same grid.
pub fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

fn check_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> Result<()> {
    if same_grid(a, b) {
        Ok(())
    } else {
        Err(FqrError::GridMismatch)
    }
}

/// A function sampled on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Curve {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Curve> {
        if values.len() != grid.len() {
            return Err(FqrError::InvalidInput(format!(
                "curve has {} values but the grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FqrError::InvalidInput(format!("non-finite curve value at index {i}")));
        }
        Ok(Curve { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Curve {
        let values = vec![0.0; grid.len()];
        Curve { grid, values }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Curve {
        let values = grid.points().iter().map(|&t| f(t)).collect();
        Curve { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, k: f64) -> Curve {
        self.map(|v| k * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Curve {
        Curve { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn add(&self, other: &Curve) -> Result<Curve> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Curve) -> Result<Curve> {
        self.zip_with(other, |a, b| a - b)
    }

    /// `self + k * other`.
    pub fn axpy(&self, k: f64, other: &Curve) -> Result<Curve> {
        self.zip_with(other, |a, b| a + k * b)
    }

    fn zip_with(&self, other: &Curve, f: impl Fn(f64, f64) -> f64) -> Result<Curve> {
        check_grid(&self.grid, &other.grid)?;
        Ok(Curve {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// Quadrature L² norm.
    pub fn norm(&self) -> f64 {
        weighted_dot(self.grid.weights(), &self.values, &self.values).sqrt()
    }

    /// Largest pointwise absolute difference.
    pub fn sup_distance(&self, other: &Curve) -> Result<f64> {
        check_grid(&self.grid, &other.grid)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }
}

/// `Σ w[m] a[m] b[m]`.
pub(crate) fn weighted_dot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum()
}

/// A kernel `k(s, t)` on the grid × grid lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    grid: Arc<Grid>,
    values: DMatrix<f64>,
}

impl Surface {
    pub fn new(grid: Arc<Grid>, values: DMatrix<f64>) -> Result<Surface> {
        let m = grid.len();
        if values.nrows() != m || values.ncols() != m {
            return Err(FqrError::InvalidInput(format!(
                "surface is {}x{} but the grid has {m} points",
                values.nrows(),
                values.ncols()
            )));
        }
        Ok(Surface { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Surface {
        let m = grid.len();
        Surface { grid, values: DMatrix::zeros(m, m) }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Surface {
        let t = grid.points();
        let m = t.len();
        let values = DMatrix::from_fn(m, m, |i, j| f(t[i], t[j]));
        Surface { grid, values }
    }

    /// `f(s) g(t)`.
    pub fn outer(f: &Curve, g: &Curve) -> Result<Surface> {
        check_grid(f.grid(), g.grid())?;
        let (a, b) = (f.values(), g.values());
        let m = a.len();
        Ok(Surface { grid: f.grid().clone(), values: DMatrix::from_fn(m, m, |i, j| a[i] * b[j]) })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn scaled(&self, k: f64) -> Surface {
        Surface { grid: self.grid.clone(), values: &self.values * k }
    }

    pub fn add(&self, other: &Surface) -> Result<Surface> {
        check_grid(&self.grid, &other.grid)?;
        Ok(Surface { grid: self.grid.clone(), values: &self.values + &other.values })
    }

    pub fn sub(&self, other: &Surface) -> Result<Surface> {
        check_grid(&self.grid, &other.grid)?;
        Ok(Surface { grid: self.grid.clone(), values: &self.values - &other.values })
    }

    /// `½ (k + kᵀ)`.
    pub fn symmetrized(&self) -> Surface {
        let values = (&self.values + self.values.transpose()) * 0.5;
        Surface { grid: self.grid.clone(), values }
    }

    /// Largest `|k(s,t) - k(t,s)|`.
    pub fn asymmetry(&self) -> f64 {
        let m = self.values.nrows();
        let mut worst = 0.0_f64;
        for i in 0..m {
            for j in 0..i {
                worst = worst.max((self.values[(i, j)] - self.values[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// Symmetric within `rel_tol` of the largest entry.
    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        self.asymmetry() <= rel_tol * self.max_abs().max(f64::MIN_POSITIVE)
    }

    /// Quadrature-weighted trace `Σ w[m] k(t_m, t_m)`.
    pub fn weighted_trace(&self) -> f64 {
        self.grid.weights().iter().enumerate().map(|(i, w)| w * self.values[(i, i)]).sum()
    }

    /// The kernel applied to a curve: `(K f)(s) = ∫ k(s,t) f(t) dt`.
    pub fn apply(&self, f: &Curve) -> Result<Curve> {
        check_grid(&self.grid, f.grid())?;
        let w = self.grid.weights();
        let m = w.len();
        let wf: Vec<f64> = w.iter().zip(f.values()).map(|(w, v)| w * v).collect();
        let values = (0..m).map(|i| (0..m).map(|j| self.values[(i, j)] * wf[j]).sum()).collect();
        Ok(Curve { grid: self.grid.clone(), values })
    }
}

/// `⟨f, g⟩ = Σ w[m] f[m] g[m]`.
pub fn inner_product(f: &Curve, g: &Curve) -> Result<f64> {
    check_grid(f.grid(), g.grid())?;
    Ok(weighted_dot(f.grid().weights(), f.values(), g.values()))
}

/// `⟨f, K f⟩ = Σ_m Σ_l w[m] w[l] f[m] k[m,l] f[l]`.
pub fn quadratic_form(k: &Surface, f: &Curve) -> Result<f64> {
    check_grid(k.grid(), f.grid())?;
    let w = f.grid().weights();
    let wf: Vec<f64> = w.iter().zip(f.values()).map(|(w, v)| w * v).collect();
    let m = wf.len();
    let kv = k.values();
    let mut total = 0.0;
    for l in 0..m {
        let col = kv.column(l);
        let inner: f64 = (0..m).map(|i| wf[i] * col[i]).sum();
        total += inner * wf[l];
    }
    Ok(total)
}

/// First derivative on an equally spaced grid: central differences inside,
/// second-order one-sided stencils at the two endpoints.
pub fn derivative(f: &Curve) -> Result<Curve> {
    let grid = f.grid();
    let m = grid.len();
    if m < 3 {
        return Err(FqrError::UnsupportedGrid(format!("derivative needs at least 3 points, got {m}")));
    }
    let h =
        grid.spacing().ok_or_else(|| FqrError::UnsupportedGrid("derivative requires an equally spaced grid".into()))?;
    let v = f.values();
    let mut d = vec![0.0; m];
    d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
    for i in 1..m - 1 {
        d[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
    }
    d[m - 1] = (3.0 * v[m - 1] - 4.0 * v[m - 2] + v[m - 3]) / (2.0 * h);
    Ok(Curve { grid: grid.clone(), values: d })
}

/// Checks that every curve lives on the grid of the first one.
pub fn common_grid(sample: &[Curve]) -> Result<Arc<Grid>> {
    let first = sample.first().ok_or(FqrError::EmptySample)?;
    let grid = first.grid().clone();
    for c in &sample[1..] {
        check_grid(&grid, c.grid())?;
    }
    Ok(grid)
}
