//! Tukey bisquare loss and the M-scale built on it.

use serde::{Deserialize, Serialize};

use crate::error::{FqrError, Result};

/// Bisquare constant giving a normal-consistent M-scale with `b = 1/2`.
pub const C0_DEFAULT: f64 = 1.54764;
/// Bisquare constant for the MM-step.
pub const C1_DEFAULT: f64 = 3.444;

const MSCALE_TOL: f64 = 1e-10;
const MSCALE_MAX_ITER: usize = 200;

/// Tuning of the two bisquare losses and the M-scale target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoConfig {
    /// S-step constant.
    pub c0: f64,
    /// M-scale target `E ρ₀(ε)`.
    pub b: f64,
    /// MM-step constant.
    pub c1: f64,
}

impl Default for RhoConfig {
    fn default() -> Self {
        Self { c0: C0_DEFAULT, b: 0.5, c1: C1_DEFAULT }
    }
}

impl RhoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c0 > 0.0) {
            return Err(FqrError::InvalidInput(format!("c0 must be positive, got {}", self.c0)));
        }
        if !(self.b > 0.0 && self.b < 1.0) {
            return Err(FqrError::InvalidInput(format!("b must lie in (0, 1), got {}", self.b)));
        }
        if !(self.c1 > self.c0) {
            return Err(FqrError::InvalidInput(format!("c1 ({}) must exceed c0 ({})", self.c1, self.c0)));
        }
        Ok(())
    }
}

/// `ρ(t) = min(1 − (1 − (t/c)²)³, 1)`.
#[inline]
pub fn rho(t: f64, c: f64) -> f64 {
    let u = t / c;
    let u2 = u * u;
    if u2 >= 1.0 || u2.is_nan() {
        1.0
    } else {
        let v = 1.0 - u2;
        1.0 - v * v * v
    }
}

/// `ρ'(t)`.
#[inline]
pub fn psi(t: f64, c: f64) -> f64 {
    let u = t / c;
    let u2 = u * u;
    if u2 >= 1.0 {
        0.0
    } else {
        let v = 1.0 - u2;
        6.0 * t * v * v / (c * c)
    }
}

/// IRLS weight `ψ(t)/t`, normalized so that its value at 0 is 1.
#[inline]
pub fn weight(t: f64, c: f64) -> f64 {
    let u = t / c;
    let u2 = u * u;
    if u2 >= 1.0 {
        0.0
    } else {
        let v = 1.0 - u2;
        v * v
    }
}

/// M-scale `s` solving `(1/(n − dof)) Σ ρ₀(r_i/s) = b`.
///
/// Returns 0 when too many residuals vanish for a positive solution to
/// exist. Infinite residuals contribute a saturated loss.
pub fn m_scale(r: &[f64], cfg: &RhoConfig, dof: usize) -> Result<f64> {
    let n = r.len();
    if n <= dof {
        return Err(FqrError::TooFewObservations { n, params: dof });
    }
    let denom = (n - dof) as f64;
    let nonzero = r.iter().filter(|v| **v != 0.0).count();
    if nonzero as f64 <= cfg.b * denom {
        return Ok(0.0);
    }
    let finite: Vec<f64> = r.iter().filter(|v| v.is_finite()).map(|v| v.abs()).collect();
    if finite.is_empty() {
        return Err(FqrError::InvalidInput("all residuals are infinite".into()));
    }
    let mut s = initial_scale(finite);
    let target = cfg.b * denom;
    for _ in 0..MSCALE_MAX_ITER {
        let total: f64 = r.iter().map(|&v| rho(v / s, cfg.c0)).sum();
        let next = s * (total / target).sqrt();
        let done = ((next - s) / s).abs() < MSCALE_TOL;
        s = next;
        if done {
            break;
        }
    }
    Ok(s)
}

/// `median|r| / 0.6745`, falling back to the largest finite residual when
/// the median is zero.
fn initial_scale(mut abs_finite: Vec<f64>) -> f64 {
    let med = crate::robust_center::median_in_place(&mut abs_finite) / 0.6745;
    if med > 0.0 {
        med
    } else {
        abs_finite.iter().fold(0.0_f64, |m, v| m.max(*v))
    }
}

/// `Σ ρ(r_i / s)`.
pub fn rho_sum(r: &[f64], s: f64, c: f64) -> f64 {
    r.iter().map(|&v| rho(v / s, c)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn rho_examples() {
        let c = 2.5;
        assert_eq!(rho(0.0, c), 0.0);
        assert_eq!(rho(c, c), 1.0);
        assert_eq!(rho(10.0 * c, c), 1.0);
        assert!((rho(c / 2.0, c) - 0.578125).abs() < 1e-15);
    }

    #[test]
    fn psi_matches_finite_differences() {
        let c = 1.7;
        for &t in &[-1.5, -0.4, 0.0, 0.3, 1.2, 1.69] {
            let h = 1e-6;
            let fd = (rho(t + h, c) - rho(t - h, c)) / (2.0 * h);
            assert!((psi(t, c) - fd).abs() < 1e-6, "t={t}");
            if t != 0.0 {
                assert!((weight(t, c) * 6.0 * t / (c * c) - psi(t, c)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(RhoConfig::default().validate().is_ok());
        assert!(RhoConfig { c1: 1.0, ..Default::default() }.validate().is_err());
        assert!(RhoConfig { b: 1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn m_scale_zero_cases() {
        let cfg = RhoConfig::default();
        assert_eq!(m_scale(&[0.0; 10], &cfg, 0).unwrap(), 0.0);
        // 6 of 10 zero: only 4 nonzero ≤ 5, no positive root.
        let r = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(m_scale(&r, &cfg, 0).unwrap(), 0.0);
        assert!(m_scale(&r, &cfg, 10).is_err());
    }

    #[test]
    fn m_scale_solves_its_equation() {
        let cfg = RhoConfig::default();
        let r = [0.3, -1.2, 2.2, 0.05, -0.7, 5.0, -9.0, 0.0, 1.1, -0.2, 0.4];
        for dof in [0, 3] {
            let s = m_scale(&r, &cfg, dof).unwrap();
            let avg = rho_sum(&r, s, cfg.c0) / (r.len() - dof) as f64;
            assert!((avg - cfg.b).abs() < 1e-8);
        }
    }

    #[test]
    fn m_scale_normal_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let r: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let s = m_scale(&r, &RhoConfig::default(), 0).unwrap();
        assert!((0.97..=1.03).contains(&s), "s = {s}");
    }

    proptest! {
        #[test]
        fn rho_is_even_bounded_monotone(t in -20.0..20.0f64, c in 0.1..5.0f64) {
            let v = rho(t, c);
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(v, rho(-t, c));
            prop_assert!(rho(t.abs() * 1.1 + 1e-9, c) >= v);
        }

        #[test]
        fn m_scale_is_scale_equivariant(
            r in proptest::collection::vec(-50.0..50.0f64, 5..40), k in 0.01..100.0f64
        ) {
            let cfg = RhoConfig::default();
            let s = m_scale(&r, &cfg, 0).unwrap();
            let scaled: Vec<f64> = r.iter().map(|v| k * v).collect();
            let sk = m_scale(&scaled, &cfg, 0).unwrap();
            prop_assert!((sk - k * s).abs() <= 1e-8 * (k * s).max(1e-300));
        }
    }
}
