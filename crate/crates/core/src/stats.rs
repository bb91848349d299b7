//! Small regression and resampling helpers for the experiment harnesses.

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};

/// Ordinary least-squares line `y ≈ intercept + slope · x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Residual sum of squares.
    pub rss: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Validation(format!(
            "line fit needs at least two paired points, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("line fit input is not finite".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx <= 0.0 {
        return Err(Error::Validation(
            "line fit needs at least two distinct x values".into(),
        ));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let tss: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    Ok(LineFit {
        slope,
        intercept,
        rss,
        r_squared,
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.iter().chain(y).any(|&v| !(v > 0.0)) {
        return Err(Error::Validation("log-log fit needs positive data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}

/// Ramsey-style curvature check: F-test of adding a quadratic term in `x` to
/// the straight-line fit. Returns the F statistic; `None` with fewer than four
/// points.
pub fn curvature_f_statistic(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() < 4 {
        return Ok(None);
    }
    let line = linear_fit(x, y)?;
    let quad_rss = quadratic_rss(x, y)?;
    let df = x.len() as f64 - 3.0;
    if quad_rss <= f64::MIN_POSITIVE {
        return Ok(Some(f64::INFINITY));
    }
    Ok(Some((line.rss - quad_rss) / (quad_rss / df)))
}

fn quadratic_rss(x: &[f64], y: &[f64]) -> Result<f64> {
    // normal equations for y = a + b x + c x², centred for conditioning
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let xs: Vec<f64> = x.iter().map(|v| v - mx).collect();
    let mut m = [[0.0f64; 3]; 3];
    let mut r = [0.0f64; 3];
    for (&a, &b) in xs.iter().zip(y) {
        let f = [1.0, a, a * a];
        for i in 0..3 {
            r[i] += f[i] * b;
            for j in 0..3 {
                m[i][j] += f[i] * f[j];
            }
        }
    }
    let coef = solve3(m, r).ok_or_else(|| Error::Numeric("singular quadratic fit".into()))?;
    Ok(xs
        .iter()
        .zip(y)
        .map(|(&a, &b)| (b - coef[0] - coef[1] * a - coef[2] * a * a).powi(2))
        .sum())
}

fn solve3(mut m: [[f64; 3]; 3], mut r: [f64; 3]) -> Option<[f64; 3]> {
    for c in 0..3 {
        let p = (c..3).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs()))?;
        if m[p][c].abs() < 1e-300 {
            return None;
        }
        m.swap(c, p);
        r.swap(c, p);
        for row in c + 1..3 {
            let pivot = m[c];
            let f = m[row][c] / pivot[c];
            for (v, pv) in m[row].iter_mut().zip(pivot).skip(c) {
                *v -= f * pv;
            }
            r[row] -= f * r[c];
        }
    }
    let mut out = [0.0; 3];
    for c in (0..3).rev() {
        let s: f64 = (c + 1..3).map(|k| m[c][k] * out[k]).sum();
        out[c] = (r[c] - s) / m[c][c];
    }
    Some(out)
}

/// Upper `1 − α` quantile of the F(1, df) distribution.
pub fn f1_critical(df: usize, alpha: f64) -> f64 {
    FisherSnedecor::new(1.0, df as f64)
        .map(|f| f.inverse_cdf(1.0 - alpha))
        .unwrap_or(f64::INFINITY)
}

/// Percentile interval of a statistic over bootstrap resamples.
pub fn percentile_interval(mut samples: Vec<f64>, level: f64) -> Result<(f64, f64)> {
    samples.retain(|v| v.is_finite());
    if samples.is_empty() {
        return Err(Error::Numeric("no finite bootstrap samples".into()));
    }
    samples.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (samples.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        samples[lo] + (samples[hi] - samples[lo]) * (pos - lo as f64)
    };
    let tail = (1.0 - level) / 2.0;
    Ok((q(tail), q(1.0 - tail)))
}

/// Uniform index resample of `0..n`.
pub fn resample_indices(n: usize, rng: &mut ChaCha20Rng) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}
