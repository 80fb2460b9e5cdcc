//! Divergences between beta distributions.

use serde::{Deserialize, Serialize};

use super::quadrature::integrate;
use super::special::{ln_beta_pdf, ln_beta_unchecked, BetaShapes};
use crate::error::Result;

/// Absolute tolerance of the Jensen-Shannon quadrature.
pub const JSD_TOLERANCE: f64 = 1e-9;

/// Similarity metric used to compare unaltered stratum posteriors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DivergenceKind {
    #[default]
    Jsd,
    Hellinger,
}

impl DivergenceKind {
    pub fn divergence(self, p: &BetaShapes, q: &BetaShapes) -> Result<f64> {
        match self {
            DivergenceKind::Jsd => jsd(p, q),
            DivergenceKind::Hellinger => hellinger(p, q),
        }
    }
}

fn ordered<'a>(p: &'a BetaShapes, q: &'a BetaShapes) -> (&'a BetaShapes, &'a BetaShapes) {
    if p.key() <= q.key() {
        (p, q)
    } else {
        (q, p)
    }
}

/// Jensen-Shannon divergence (natural logarithm) between two beta
/// distributions: ½(KL(P‖M) + KL(Q‖M)) with M the equal mixture.
///
/// The arguments are put in a canonical order before integrating, so the
/// result is bitwise symmetric.
pub fn jsd(p: &BetaShapes, q: &BetaShapes) -> Result<f64> {
    p.validate()?;
    q.validate()?;
    if p == q {
        return Ok(0.0);
    }
    let (p, q) = ordered(p, q);
    let (pa, pb, pl) = (p.alpha, p.beta, ln_beta_unchecked(p.alpha, p.beta));
    let (qa, qb, ql) = (q.alpha, q.beta, ln_beta_unchecked(q.alpha, q.beta));
    let integrand = move |x: f64| {
        let lp = ln_beta_pdf(x, pa, pb, pl);
        let lq = ln_beta_pdf(x, qa, qb, ql);
        if lp == f64::NEG_INFINITY && lq == f64::NEG_INFINITY {
            return 0.0;
        }
        let (hi, lo) = if lp >= lq { (lp, lq) } else { (lq, lp) };
        let lm = hi + (lo - hi).exp().ln_1p() - std::f64::consts::LN_2;
        let mut v = 0.0;
        if lp > f64::NEG_INFINITY {
            v += lp.exp() * (lp - lm);
        }
        if lq > f64::NEG_INFINITY {
            v += lq.exp() * (lq - lm);
        }
        0.5 * v
    };
    let v = integrate(integrand, 0.0, 1.0, JSD_TOLERANCE)?;
    Ok(v.max(0.0))
}

/// Hellinger distance in the form 1 − ∫√(p q), evaluated in closed form:
/// 1 − B((a₁+a₂)/2, (b₁+b₂)/2) / √(B(a₁,b₁) B(a₂,b₂)).
pub fn hellinger(p: &BetaShapes, q: &BetaShapes) -> Result<f64> {
    p.validate()?;
    q.validate()?;
    if p == q {
        return Ok(0.0);
    }
    let (p, q) = ordered(p, q);
    let ln_ratio = ln_beta_unchecked(0.5 * (p.alpha + q.alpha), 0.5 * (p.beta + q.beta))
        - 0.5 * (ln_beta_unchecked(p.alpha, p.beta) + ln_beta_unchecked(q.alpha, q.beta));
    Ok((1.0 - ln_ratio.exp()).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(a: f64, b: f64) -> BetaShapes {
        BetaShapes::new(a, b).unwrap()
    }

    #[test]
    fn identical_distributions() {
        assert_eq!(jsd(&b(3.0, 7.0), &b(3.0, 7.0)).unwrap(), 0.0);
        assert_eq!(hellinger(&b(3.0, 7.0), &b(3.0, 7.0)).unwrap(), 0.0);
    }

    #[test]
    fn hellinger_hand_value() {
        let h = hellinger(&b(1.0, 1.0), &b(3.0, 1.0)).unwrap();
        assert!((h - (1.0 - 3f64.sqrt() / 2.0)).abs() < 1e-14);
    }

    #[test]
    fn jsd_bounded_by_ln2() {
        let v = jsd(&b(1.0, 25.0), &b(25.0, 1.0)).unwrap();
        assert!(v > 0.6 && v <= std::f64::consts::LN_2 + 1e-9, "{v}");
    }

    #[test]
    fn bitwise_symmetric() {
        let p = b(4.0, 21.0);
        let q = b(9.0, 16.0);
        assert_eq!(jsd(&p, &q).unwrap().to_bits(), jsd(&q, &p).unwrap().to_bits());
        assert_eq!(
            hellinger(&p, &q).unwrap().to_bits(),
            hellinger(&q, &p).unwrap().to_bits()
        );
    }
}
