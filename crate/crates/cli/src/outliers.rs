//! Boxplot-fence flagging of residuals.

use serde::{Deserialize, Serialize};

/// Multiplier of the interquartile range.
pub const FENCE_IQR: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flagged {
    pub index: usize,
    pub id: String,
    pub residual: f64,
}

/// Linear-interpolation quantile of sorted data (the common "type 7" rule).
pub fn quantile(sorted: &[f64], prob: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `(Q1 − 1.5 IQR, Q3 + 1.5 IQR)`.
pub fn boxplot_fences(residuals: &[f64]) -> (f64, f64) {
    if residuals.is_empty() {
        return (f64::NEG_INFINITY, f64::INFINITY);
    }
    let mut s = residuals.to_vec();
    s.sort_by(f64::total_cmp);
    let (q1, q3) = (quantile(&s, 0.25), quantile(&s, 0.75));
    let iqr = q3 - q1;
    (q1 - FENCE_IQR * iqr, q3 + FENCE_IQR * iqr)
}

/// Observations strictly outside the fences.
pub fn flag(residuals: &[f64], ids: &[String], fences: (f64, f64)) -> Vec<Flagged> {
    residuals
        .iter()
        .enumerate()
        .filter(|(_, r)| **r < fences.0 || **r > fences.1)
        .map(|(index, r)| Flagged { index, id: ids.get(index).cloned().unwrap_or_default(), residual: *r })
        .collect()
}
