//! Summary statistics for repeated runs.

use serde::{Deserialize, Serialize};

use crate::distributions::ln_gamma;
use crate::error::{Error, Result};

/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959964;

/// Standard error of a sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdStats {
    pub n: usize,
    pub s: f64,
    /// Bias correction c_n = Γ((n−1)/2)/Γ(n/2)·√((n−1)/2).
    pub c_n: f64,
    /// s·√(c_n² − 1).
    pub se_unbiased: f64,
}

pub fn se_of_sd(s: f64, n: usize) -> Result<SdStats> {
    if n < 2 {
        return Err(Error::Domain(format!("standard error of an SD needs n >= 2, got {n}")));
    }
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("standard deviation must be nonnegative, got {s}")));
    }
    let half = (n as f64 - 1.0) / 2.0;
    let ratio = (ln_gamma(half) - ln_gamma(n as f64 / 2.0)).exp();
    let c_n = ratio * half.sqrt();
    Ok(SdStats {
        n,
        s,
        c_n,
        se_unbiased: s * (c_n * c_n - 1.0).max(0.0).sqrt(),
    })
}

/// Mean, spread and normal 95% interval of a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub sd: Option<f64>,
    pub se_sd: Option<f64>,
    pub min: f64,
    pub max: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (mut sd, mut se_sd, mut ci_low, mut ci_high) = (None, None, None, None);
        if n >= 2 {
            let s = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
            let half = Z_95 * s / (n as f64).sqrt();
            sd = Some(s);
            se_sd = se_of_sd(s, n).ok().map(|x| x.se_unbiased);
            ci_low = Some(mean - half);
            ci_high = Some(mean + half);
        }
        Some(Summary {
            n,
            mean,
            sd,
            se_sd,
            min,
            max,
            ci_low,
            ci_high,
        })
    }
}
