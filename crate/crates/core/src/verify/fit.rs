//! Least-squares fits of sampled decay curves.

use crate::error::{Error, Result};

/// Largest log-deviation a series may have from its power-law fit and still
/// be called a power law.
pub const POWER_LAW_RESIDUAL_THRESHOLD: f64 = 0.05;

pub const MIN_FIT_SAMPLES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub constant: f64,
    pub exponent: f64,
    /// `max |log value − log(C·t^{−h})|` over the fitted samples.
    pub residual: f64,
}

impl DecayFit {
    pub fn is_power_law(&self) -> bool {
        self.residual <= POWER_LAW_RESIDUAL_THRESHOLD
    }
}

/// Ordinary least squares `y ≈ a + b·x`; returns `(a, b)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}

fn window_samples(series: &[(f64, f64)], window: (f64, f64)) -> Vec<(f64, f64)> {
    let (lo, hi) = window;
    series
        .iter()
        .copied()
        .filter(|&(t, _)| t >= lo * (1.0 - 1e-12) && t <= hi * (1.0 + 1e-12))
        .collect()
}

/// Fit `value ≈ C·t^{−h}` on the samples whose time lies in `window`.
pub fn fit_decay_rate(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    let pts = window_samples(series, window);
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{} samples in [{}, {}], need {MIN_FIT_SAMPLES}",
            pts.len(),
            window.0,
            window.1
        )));
    }
    if pts.iter().any(|&(t, v)| !(t > 0.0) || !(v > 0.0)) {
        return Err(Error::InvalidArgument("power-law fit needs positive times and values".into()));
    }
    let x: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    if x.iter().all(|&v| v == x[0]) {
        return Err(Error::InsufficientData("all samples at one instant".into()));
    }
    let (a, b) = linear_fit(&x, &y);
    let residual = x.iter().zip(&y).map(|(xi, yi)| (yi - a - b * xi).abs()).fold(0.0, f64::max);
    Ok(DecayFit { constant: a.exp(), exponent: -b, residual })
}

/// Fit `value ≈ C·e^{−σt}` (after the caller removed any known prefactor);
/// returns `(C, σ, residual)` with the residual measured in log space.
pub fn fit_exponential_rate(series: &[(f64, f64)], window: (f64, f64)) -> Result<(f64, f64, f64)> {
    let pts = window_samples(series, window);
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientData(format!("{} samples in window", pts.len())));
    }
    if pts.iter().any(|&(_, v)| !(v > 0.0)) {
        return Err(Error::InvalidArgument("exponential fit needs positive values".into()));
    }
    let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (a, b) = linear_fit(&x, &y);
    let residual = x.iter().zip(&y).map(|(xi, yi)| (yi - a - b * xi).abs()).fold(0.0, f64::max);
    Ok((a.exp(), -b, residual))
}

/// Fit `value ≈ C·τ^{−h} + c` with `h` fixed; returns `(C, c, max relative
/// residual)`.
pub fn fit_power_plus_constant(series: &[(f64, f64)], h: f64) -> Result<(f64, f64, f64)> {
    if series.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientData(format!("{} samples", series.len())));
    }
    let x: Vec<f64> = series.iter().map(|&(t, _)| t.powf(-h)).collect();
    let y: Vec<f64> = series.iter().map(|&(_, v)| v).collect();
    if x.iter().all(|&v| v == x[0]) {
        return Err(Error::InsufficientData("all samples at one instant".into()));
    }
    let (c, big_c) = linear_fit(&x, &y);
    let residual = x
        .iter()
        .zip(&y)
        .map(|(xi, yi)| ((big_c * xi + c - yi) / yi.abs().max(1e-300)).abs())
        .fold(0.0, f64::max);
    Ok((big_c, c, residual))
}
