//! Least-squares lines and power laws.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fitted line `y = slope * x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Ordinary least squares on paired samples.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() {
        return Err(Error::invalid("x and y lengths differ"));
    }
    let n = xs.len();
    if n < 2 {
        return Err(Error::Numeric(format!("a line fit needs at least 2 points, got {n}")));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite sample in line fit".into()));
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::Numeric("line fit with a single distinct abscissa".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Ok(LineFit { slope, intercept: my - slope * mx, r_squared, points: n })
}

/// Power law `value = exp(intercept) * n^exponent` fitted on `(ln n, ln value)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_lo: u64,
    pub n_hi: u64,
}

/// Fits the samples with `n_lo <= n <= n_hi`. Every value in the window must be positive.
pub fn fit_power_law(iterations: &[u64], values: &[f64], n_lo: u64, n_hi: u64) -> Result<PowerLawFit> {
    if n_lo == 0 || n_lo >= n_hi {
        return Err(Error::invalid(format!("fit window must satisfy 0 < lo < hi, got {n_lo}:{n_hi}")));
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (&n, &v) in iterations.iter().zip(values) {
        if n < n_lo || n > n_hi {
            continue;
        }
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Numeric(format!("value {v} at n = {n} cannot be fitted on a log scale")));
        }
        xs.push((n as f64).ln());
        ys.push(v.ln());
    }
    let line = fit_line(&xs, &ys)?;
    Ok(PowerLawFit { exponent: line.slope, intercept: line.intercept, r_squared: line.r_squared, n_lo, n_hi })
}
