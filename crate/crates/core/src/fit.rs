//! Least-squares fits of log–log data.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares `y ≈ slope · x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(LabError::InvalidParameter(format!(
            "fit needs two or more paired samples (got {} and {})",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(LabError::InvalidParameter(
            "fit abscissae are all equal".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - slope * a - intercept).powi(2))
        .sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(LineFit {
        slope,
        intercept,
        r2,
    })
}

/// Fit of `log v` against `log t`.
pub fn loglog_fit(t: &[f64], v: &[f64]) -> Result<LineFit> {
    let (lx, ly) = logs(t, v)?;
    linear_fit(&lx, &ly)
}

fn logs(t: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if let Some(bad) = t.iter().chain(v).find(|x| !(**x > 0.0)) {
        return Err(LabError::InvalidParameter(format!(
            "log fit of non-positive value {bad}"
        )));
    }
    Ok((
        t.iter().map(|x| x.ln()).collect(),
        v.iter().map(|x| x.ln()).collect(),
    ))
}

/// Fit of `v ≈ t^s (c_1 |log t| + c_0)` for data with a logarithmic
/// factor. For fixed `s` the coefficients come from a relative-weighted
/// linear solve; `s` minimizes the log-space residual by golden-section
/// search around the plain slope. `r2` refers to `log v`.
pub fn log_augmented_fit(t: &[f64], v: &[f64]) -> Result<LineFit> {
    let (lx, ly) = logs(t, v)?;
    let plain = linear_fit(&lx, &ly)?;
    let ell: Vec<f64> = lx.iter().map(|x| x.abs()).collect();

    let coefficients = |s: f64| -> Option<(f64, f64)> {
        // Minimize Σ ((c1 L + c0)/y − 1)² with y = v t^{−s}.
        let mut a11 = 0.0;
        let mut a12 = 0.0;
        let mut a22 = 0.0;
        let mut r1 = 0.0;
        let mut r2 = 0.0;
        for k in 0..lx.len() {
            let y = (ly[k] - s * lx[k]).exp();
            let (p, q) = (ell[k] / y, 1.0 / y);
            a11 += p * p;
            a12 += p * q;
            a22 += q * q;
            r1 += p;
            r2 += q;
        }
        let det = a11 * a22 - a12 * a12;
        if det.abs() < 1e-300 {
            return None;
        }
        Some(((r1 * a22 - r2 * a12) / det, (a11 * r2 - a12 * r1) / det))
    };
    let sse = |s: f64| -> f64 {
        match coefficients(s) {
            Some((c1, c0)) => (0..lx.len())
                .map(|k| {
                    let m = c1 * ell[k] + c0;
                    if m > 0.0 {
                        (ly[k] - s * lx[k] - m.ln()).powi(2)
                    } else {
                        f64::INFINITY
                    }
                })
                .sum(),
            None => f64::INFINITY,
        }
    };

    let (mut lo, mut hi) = (plain.slope - 1.5, plain.slope + 1.5);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (sse(x1), sse(x2));
    for _ in 0..200 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = sse(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = sse(x2);
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    let s = 0.5 * (lo + hi);
    let best = sse(s);
    if !best.is_finite() {
        return Err(LabError::InvalidParameter(
            "log-augmented fit has no positive model".into(),
        ));
    }
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let (c1, c0) = coefficients(s).expect("finite objective implies coefficients");
    Ok(LineFit {
        slope: s,
        intercept: (c1 + c0).ln(),
        r2: if syy == 0.0 { 1.0 } else { 1.0 - best / syy },
    })
}
