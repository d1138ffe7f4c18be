//! Synthetic spectra shaped like the Tecator meat data: 100 absorbances
//! between 850 and 1050 nm and a fat-content response driven by the first
//! derivative of the spectrum.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use fqr_core::{Curve, Grid, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const WAVELENGTH_MIN: f64 = 850.0;
pub const WAVELENGTH_MAX: f64 = 1050.0;

/// Standard deviations of the derivative scores.
const SCORE_SD: [f64; 4] = [2.0, 1.2, 0.8, 0.5];
const NOISE_SD: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct SynthOptions {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    /// Share of responses replaced by gross outliers.
    pub outlier_fraction: f64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions { n: 215, m: 100, seed: fqr_core::regression::DEFAULT_SEED, outlier_fraction: 0.0 }
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub ids: Vec<String>,
    pub wavelengths: Vec<f64>,
    pub grid: Arc<Grid>,
    pub spectra: Vec<Curve>,
    pub fat: Vec<f64>,
    pub outliers: Vec<bool>,
}

/// Antiderivative of `√2 cos(kπt)` vanishing at 0; the spectra's
/// derivatives are cosine series.
fn component_integral(k: usize, t: f64) -> f64 {
    SQRT_2 * (k as f64 * PI * t).sin() / (k as f64 * PI)
}

fn baseline(t: f64) -> f64 {
    2.8 + 0.6 * t + 0.4 * (-((t - 0.6) / 0.15).powi(2)).exp()
}

/// Fat content as a quadratic function of the derivative scores.
pub fn fat_content(scores: &[f64]) -> f64 {
    let (a, b) = (scores[0], scores[1]);
    18.0 + 1.5 * a - 0.8 * b + 0.3 * scores[2] + 0.25 * a * a + 0.2 * a * b
}

pub fn generate(opts: &SynthOptions) -> Result<SynthData> {
    let grid = Grid::uniform(opts.m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut data = SynthData {
        ids: Vec::with_capacity(opts.n),
        wavelengths: grid.points().iter().map(|t| WAVELENGTH_MIN + t * (WAVELENGTH_MAX - WAVELENGTH_MIN)).collect(),
        grid: grid.clone(),
        spectra: Vec::with_capacity(opts.n),
        fat: Vec::with_capacity(opts.n),
        outliers: Vec::with_capacity(opts.n),
    };
    for i in 0..opts.n {
        let scores: Vec<f64> = SCORE_SD.iter().map(|sd| sd * rng.sample::<f64, _>(StandardNormal)).collect();
        let level: f64 = 0.3 * rng.sample::<f64, _>(StandardNormal);
        let values = grid
            .points()
            .iter()
            .map(|&t| {
                let shape: f64 = scores.iter().enumerate().map(|(k, s)| s * component_integral(k + 1, t)).sum();
                baseline(t) + level + shape
            })
            .collect();
        let mut fat = fat_content(&scores) + NOISE_SD * rng.sample::<f64, _>(StandardNormal);
        let outlier = rng.random::<f64>() < opts.outlier_fraction;
        if outlier {
            fat += 25.0 + 5.0 * rng.sample::<f64, _>(StandardNormal);
        }
        data.ids.push(format!("s{:03}", i + 1));
        data.spectra.push(Curve::new(grid.clone(), values)?);
        data.fat.push(fat);
        data.outliers.push(outlier);
    }
    Ok(data)
}
