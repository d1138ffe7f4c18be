//! Regression design built from principal-direction scores, and the
//! coefficient layout `(a, b, u)` with `u = vech((2 − 1{j=ℓ}) v_{jℓ})`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{FqrError, Result};

/// Number of quadratic coefficients for `p` directions.
pub fn n_quadratic(p: usize) -> usize {
    p * (p + 1) / 2
}

/// Lower-triangle index pairs `(j, ℓ)` with `j ≥ ℓ`, stacked column by column:
/// `(0,0), (1,0), …, (p−1,0), (1,1), …, (p−1,p−1)`.
pub fn vech_pairs(p: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(n_quadratic(p));
    for col in 0..p {
        for row in col..p {
            pairs.push((row, col));
        }
    }
    pairs
}

/// Half-vectorization of the products `x_j x_ℓ`.
pub fn vech_products(x: &[f64]) -> Vec<f64> {
    vech_pairs(x.len()).into_iter().map(|(j, l)| x[j] * x[l]).collect()
}

/// Scores `x` (n×p) and their products `z` (n×q).
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub x: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub centered: bool,
}

impl Design {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.z.ncols()
    }

    /// Number of regression coefficients including the intercept.
    pub fn n_coef(&self) -> usize {
        1 + self.p() + self.q()
    }

    /// Full matrix `[1 | x | z]`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let (n, p, q) = (self.n(), self.p(), self.q());
        let mut a = DMatrix::zeros(n, 1 + p + q);
        a.column_mut(0).fill(1.0);
        a.view_mut((0, 1), (n, p)).copy_from(&self.x);
        a.view_mut((0, 1 + p), (n, q)).copy_from(&self.z);
        a
    }

    /// Residuals `y − a − bᵀx_i − uᵀz_i`.
    pub fn residuals(&self, y: &[f64], coef: &CoefVector) -> Vec<f64> {
        (0..self.n())
            .map(|i| {
                let mut fit = coef.a;
                for (j, b) in coef.b.iter().enumerate() {
                    fit += b * self.x[(i, j)];
                }
                for (k, u) in coef.u.iter().enumerate() {
                    fit += u * self.z[(i, k)];
                }
                y[i] - fit
            })
            .collect()
    }
}

/// Builds `[x | vech(x xᵀ)]` from an n×p score matrix.
pub fn build_design(scores: &DMatrix<f64>, centered: bool) -> Result<Design> {
    let (n, p) = scores.shape();
    if p == 0 {
        return Err(FqrError::InvalidInput("design needs at least one score column".into()));
    }
    let pairs = vech_pairs(p);
    let z = DMatrix::from_fn(n, pairs.len(), |i, k| {
        let (j, l) = pairs[k];
        scores[(i, j)] * scores[(i, l)]
    });
    Ok(Design { x: scores.clone(), z, centered })
}

/// Intercept, slope coordinates and vech-coded quadratic coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefVector {
    pub a: f64,
    pub b: Vec<f64>,
    pub u: Vec<f64>,
}

impl CoefVector {
    pub fn new(a: f64, b: Vec<f64>, u: Vec<f64>) -> Result<CoefVector> {
        if u.len() != n_quadratic(b.len()) {
            return Err(FqrError::InvalidInput(format!(
                "{} quadratic coefficients do not match p = {}",
                u.len(),
                b.len()
            )));
        }
        Ok(CoefVector { a, b, u })
    }

    pub fn zeros(p: usize) -> CoefVector {
        CoefVector { a: 0.0, b: vec![0.0; p], u: vec![0.0; n_quadratic(p)] }
    }

    pub fn p(&self) -> usize {
        self.b.len()
    }

    /// Symmetric matrix `V` with `v_jj = u_jj` and `v_jℓ = u_jℓ / 2` off the diagonal.
    pub fn v_matrix(&self) -> DMatrix<f64> {
        let p = self.p();
        let mut v = DMatrix::zeros(p, p);
        for (k, (j, l)) in vech_pairs(p).into_iter().enumerate() {
            if j == l {
                v[(j, j)] = self.u[k];
            } else {
                v[(j, l)] = 0.5 * self.u[k];
                v[(l, j)] = 0.5 * self.u[k];
            }
        }
        v
    }

    /// `u = vech((2 − 1{j=ℓ}) v_jℓ)` from a symmetric `V`.
    pub fn u_from_v(v: &DMatrix<f64>) -> Vec<f64> {
        vech_pairs(v.nrows()).into_iter().map(|(j, l)| if j == l { v[(j, j)] } else { 2.0 * v[(j, l)] }).collect()
    }

    pub(crate) fn to_vector(&self) -> DVector<f64> {
        let mut out = Vec::with_capacity(1 + self.b.len() + self.u.len());
        out.push(self.a);
        out.extend_from_slice(&self.b);
        out.extend_from_slice(&self.u);
        DVector::from_vec(out)
    }

    pub(crate) fn from_vector(v: &DVector<f64>, p: usize) -> CoefVector {
        let q = n_quadratic(p);
        CoefVector { a: v[0], b: v.rows(1, p).iter().copied().collect(), u: v.rows(1 + p, q).iter().copied().collect() }
    }

    pub fn scaled(&self, k: f64) -> CoefVector {
        CoefVector {
            a: k * self.a,
            b: self.b.iter().map(|v| k * v).collect(),
            u: self.u.iter().map(|v| k * v).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force enumeration of the lower triangle column by column.
    fn brute_force_products(x: &[f64]) -> Vec<f64> {
        let p = x.len();
        let mut out = Vec::new();
        for col in 0..p {
            for row in 0..p {
                if row >= col {
                    out.push(x[row] * x[col]);
                }
            }
        }
        out
    }

    #[test]
    fn vech_examples() {
        assert_eq!(vech_products(&[3.0]), vec![9.0]);
        assert_eq!(vech_products(&[1.0, 2.0]), vec![1.0, 2.0, 4.0]);
        assert_eq!(vech_products(&[1.0, 2.0, 3.0]), vec![1.0, 2.0, 3.0, 4.0, 6.0, 9.0]);
    }

    #[test]
    fn vech_matches_brute_force() {
        for p in 1..=4 {
            let x: Vec<f64> = (0..p).map(|i| 1.5 + i as f64 * 0.7).collect();
            assert_eq!(vech_products(&x), brute_force_products(&x));
        }
    }

    #[test]
    fn design_layout() {
        let scores = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -1.0, 0.5]);
        let d = build_design(&scores, true).unwrap();
        assert_eq!(d.q(), 3);
        assert_eq!(d.z.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 2.0, 4.0]);
        let a = d.matrix();
        assert_eq!(a.row(1).iter().copied().collect::<Vec<_>>(), vec![1.0, -1.0, 0.5, 1.0, -0.5, 0.25]);
        let coef = CoefVector::new(1.0, vec![1.0, 1.0], vec![1.0, 1.0, 1.0]).unwrap();
        let r = d.residuals(&[10.0, 0.0], &coef);
        assert_eq!(r, vec![10.0 - 11.0, -(1.0 - 1.0 + 0.5 + 1.0 - 0.5 + 0.25)]);
    }

    #[test]
    fn v_and_u_round_trip() {
        let v = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, -0.3, 0.2, 2.0, 0.5, -0.3, 0.5, 3.0]);
        let u = CoefVector::u_from_v(&v);
        assert_eq!(u, vec![1.0, 0.4, -0.6, 2.0, 1.0, 3.0]);
        let coef = CoefVector::new(0.0, vec![0.0; 3], u).unwrap();
        assert_eq!(coef.v_matrix(), v);
        assert!(CoefVector::new(0.0, vec![0.0; 3], vec![0.0; 5]).is_err());
    }
}
