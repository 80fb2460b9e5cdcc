//! Log-gamma based beta function, the regularized incomplete beta function
//! and the binomial probability mass function.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const CF_MAX_ITERATIONS: usize = 300;
const CF_TOLERANCE: f64 = 1e-14;
const CF_TINY: f64 = 1e-300;

/// Shape parameters of a beta distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaShapes {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaShapes {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let s = BetaShapes { alpha, beta };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.beta.is_finite() && self.alpha > 0.0 && self.beta > 0.0)
        {
            return Err(Error::Domain(format!(
                "beta shapes must be positive and finite, got ({}, {})",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    /// Log-density at `x`; `-inf` outside the support or where the density vanishes.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        ln_beta_pdf(x, self.alpha, self.beta, ln_beta_unchecked(self.alpha, self.beta))
    }

    /// Bit-level key, used for memo tables and canonical argument ordering.
    pub(crate) fn key(&self) -> (u64, u64) {
        (self.alpha.to_bits(), self.beta.to_bits())
    }
}

pub(crate) fn ln_beta_unchecked(a: f64, b: f64) -> f64 {
    libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(a + b)
}

/// ln B(a, b).
pub fn log_beta(a: f64, b: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0) {
        return Err(Error::Domain(format!(
            "log_beta requires positive finite arguments, got ({a}, {b})"
        )));
    }
    Ok(ln_beta_unchecked(a, b))
}

/// ln Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub(crate) fn ln_beta_pdf(x: f64, a: f64, b: f64, ln_b: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        return f64::NEG_INFINITY;
    }
    let left = if a == 1.0 { 0.0 } else { (a - 1.0) * x.ln() };
    let right = if b == 1.0 { 0.0 } else { (b - 1.0) * (-x).ln_1p() };
    let v = left + right - ln_b;
    if v.is_nan() {
        // 0 * -inf at an endpoint with shape exactly 1 is handled above; anything
        // else reaching here is an endpoint with vanishing density.
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Modified Lentz evaluation of the incomplete beta continued fraction.
fn beta_continued_fraction(x: f64, a: f64, b: f64) -> Result<f64> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITERATIONS {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < CF_TOLERANCE {
            return Ok(h);
        }
    }
    Err(Error::ContinuedFraction {
        iterations: CF_MAX_ITERATIONS,
        x,
        a,
        b,
    })
}

/// Returns `(I_x(a, b), 1 - I_x(a, b))`, each evaluated on the side where it
/// does not suffer cancellation.
pub(crate) fn beta_cdf_and_sf(x: f64, a: f64, b: f64) -> Result<(f64, f64)> {
    if x <= 0.0 {
        return Ok((0.0, 1.0));
    }
    if x >= 1.0 {
        return Ok((1.0, 0.0));
    }
    let ln_front = a * x.ln() + b * (-x).ln_1p() - ln_beta_unchecked(a, b);
    let front = ln_front.exp();
    if x <= a / (a + b) {
        let lower = (front * beta_continued_fraction(x, a, b)? / a).clamp(0.0, 1.0);
        Ok((lower, 1.0 - lower))
    } else {
        let upper = (front * beta_continued_fraction(1.0 - x, b, a)? / b).clamp(0.0, 1.0);
        Ok((1.0 - upper, upper))
    }
}

/// Regularized incomplete beta function I_x(α, β), the Beta(α, β) CDF at `x`.
pub fn reg_inc_beta(x: f64, shapes: BetaShapes) -> Result<f64> {
    shapes.validate()?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("x must lie in [0, 1], got {x}")));
    }
    Ok(beta_cdf_and_sf(x, shapes.alpha, shapes.beta)?.0)
}

/// Binomial probability C(n, k) p^k (1-p)^(n-k).
///
/// The coefficient is built by the multiplicative recurrence and combined with
/// integer powers, which keeps the result within a few ulps; designs whose
/// terms leave the normal range fall back to log space.
pub fn binom_pmf(k: u32, n: u32, p: f64) -> Result<f64> {
    if k > n {
        return Err(Error::Domain(format!("binom_pmf requires k <= n, got k = {k}, n = {n}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("success probability must lie in [0, 1], got {p}")));
    }
    if p == 0.0 {
        return Ok(if k == 0 { 1.0 } else { 0.0 });
    }
    if p == 1.0 {
        return Ok(if k == n { 1.0 } else { 0.0 });
    }
    let q = 1.0 - p;
    let small = k.min(n - k);
    let mut coef = 1.0f64;
    for i in 1..=small {
        coef = coef * f64::from(n - small + i) / f64::from(i);
    }
    let pk = p.powi(k as i32);
    let qk = q.powi((n - k) as i32);
    let direct = coef * pk * qk;
    if coef.is_finite() && pk.is_normal() && qk.is_normal() && direct.is_normal() {
        return Ok(direct);
    }
    let ln_coef =
        libm::lgamma(f64::from(n) + 1.0) - libm::lgamma(f64::from(k) + 1.0) - libm::lgamma(f64::from(n - k) + 1.0);
    Ok((ln_coef + f64::from(k) * p.ln() + f64::from(n - k) * (-p).ln_1p()).exp())
}

/// Full pmf vector over 0..=n.
pub fn binom_pmf_table(n: u32, p: f64) -> Result<Vec<f64>> {
    (0..=n).map(|k| binom_pmf(k, n, p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_beta_identities() {
        assert_eq!(log_beta(1.0, 1.0).unwrap(), 0.0);
        assert!((log_beta(3.0, 1.0).unwrap() - (1.0f64 / 3.0).ln()).abs() < 1e-14);
        assert!(log_beta(0.0, 1.0).is_err());
        assert!(log_beta(1.0, f64::NAN).is_err());
        // B(1/2, 1/2) = pi
        assert!((log_beta(0.5, 0.5).unwrap() - std::f64::consts::PI.ln()).abs() < 1e-14);
    }

    #[test]
    fn incomplete_beta_edges() {
        let u = BetaShapes::new(1.0, 1.0).unwrap();
        assert_eq!(reg_inc_beta(0.0, u).unwrap(), 0.0);
        assert_eq!(reg_inc_beta(1.0, u).unwrap(), 1.0);
        assert!((reg_inc_beta(0.5, u).unwrap() - 0.5).abs() < 1e-15);
        for a in [2.0, 13.0] {
            let s = BetaShapes::new(a, a).unwrap();
            assert!((reg_inc_beta(0.5, s).unwrap() - 0.5).abs() < 1e-13);
        }
        assert!(reg_inc_beta(1.5, u).is_err());
        assert!(BetaShapes::new(-1.0, 1.0).is_err());
    }

    #[test]
    fn incomplete_beta_large_shapes_converge() {
        // shapes reached after pooling twenty strata of 24 patients
        let s = BetaShapes::new(700.0, 800.0).unwrap();
        let v = reg_inc_beta(0.47, s).unwrap();
        assert!(v > 0.0 && v < 1.0);
    }

    #[test]
    fn binomial_edges() {
        assert_eq!(binom_pmf(1, 2, 0.5).unwrap(), 0.5);
        assert_eq!(binom_pmf(0, 7, 0.0).unwrap(), 1.0);
        assert_eq!(binom_pmf(7, 7, 1.0).unwrap(), 1.0);
        assert_eq!(binom_pmf(3, 7, 1.0).unwrap(), 0.0);
        assert!(binom_pmf(3, 2, 0.5).is_err());
    }

    #[test]
    fn binomial_sums_to_one() {
        for n in [1u32, 5, 15, 24, 54, 108] {
            for p in [0.01, 0.15, 0.2, 0.35, 0.5, 0.9] {
                let s: f64 = binom_pmf_table(n, p).unwrap().iter().sum();
                assert!((s - 1.0).abs() < 1e-12, "n={n} p={p} sum={s}");
            }
        }
    }
}
