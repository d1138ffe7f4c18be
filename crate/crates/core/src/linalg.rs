//! Small dense least-squares helpers shared by the regression routines.

use nalgebra::{DMatrix, DVector};

/// Relative threshold on the pivoted `R` diagonal below which a design is
/// treated as rank deficient.
const RANK_TOL: f64 = 1e-10;

/// Least-squares solution of `a x ≈ b` via column-pivoted QR, or `None` when
/// `a` is numerically rank deficient.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let (n, k) = a.shape();
    if n < k || k == 0 {
        return None;
    }
    let qr = a.clone().col_piv_qr();
    let r = qr.r();
    let top = r[(0, 0)].abs();
    if !(top > 0.0) || (0..k).any(|i| r[(i, i)].abs() <= RANK_TOL * top) {
        return None;
    }
    let mut rhs = b.clone();
    qr.q_tr_mul(&mut rhs);
    let mut x = rhs.rows(0, k).into_owned();
    if !r.view((0, 0), (k, k)).solve_upper_triangular_mut(&mut x) {
        return None;
    }
    qr.p().inv_permute_rows(&mut x);
    Some(x)
}

/// Weighted least squares `argmin Σ w_i (b_i - a_i x)²` with `w_i ≥ 0`.
///
/// Solves the normal equations by Cholesky and falls back to pivoted QR on
/// the row-scaled system when the Cholesky factorization breaks down.
pub fn weighted_lstsq(a: &DMatrix<f64>, b: &DVector<f64>, w: &[f64]) -> Option<DVector<f64>> {
    let (n, k) = a.shape();
    let active = w.iter().filter(|&&v| v > 0.0).count();
    if active < k {
        return None;
    }
    let mut scaled = a.clone();
    let mut rhs = b.clone();
    for i in 0..n {
        let s = w[i].sqrt();
        scaled.row_mut(i).scale_mut(s);
        rhs[i] *= s;
    }
    let gram = scaled.tr_mul(&scaled);
    let diag_max = gram.diagonal().iter().fold(0.0_f64, |m, v| m.max(*v));
    if let Some(chol) = gram.clone().cholesky() {
        let l = chol.l_dirty();
        let min_pivot = (0..k).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
        // Well-conditioned enough that the normal equations lose little.
        if min_pivot > 1e-8 * diag_max {
            return Some(chol.solve(&scaled.tr_mul(&rhs)));
        }
    }
    lstsq(&scaled, &rhs)
}

/// Exact solution of a square system, `None` if singular.
pub fn solve_square(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    lstsq(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_coefficients() {
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let b = DVector::from_vec(vec![1.0, 3.0, 5.0, 7.0]);
        let x = lstsq(&a, &b).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
        let xw = weighted_lstsq(&a, &b, &[1.0, 0.5, 2.0, 1.0]).unwrap();
        assert!((xw[0] - 1.0).abs() < 1e-12 && (xw[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn detects_rank_deficiency() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert!(lstsq(&a, &b).is_none());
        assert!(weighted_lstsq(&a, &b, &[1.0, 1.0, 1.0]).is_none());
        let full = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        assert!(weighted_lstsq(&full, &b, &[1.0, 0.0, 0.0]).is_none());
    }
}
