//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use basketopt_core::distributions::{jsd, reg_inc_beta};
use basketopt_core::{BetaShapes, Design, DivergenceKind, TuningParams};
use num::{BigUint, ToPrimitive};

/// C(n, k) as an exact big integer, converted once.
pub fn choose(n: u32, k: u32) -> f64 {
    let mut c = BigUint::from(1u32);
    for i in 0..k {
        c = c * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    c.to_f64().unwrap()
}

pub fn binom_pmf(k: u32, n: u32, p: f64) -> f64 {
    choose(n, k) * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
}

/// I_x(a, b) for integer shapes via the binomial tail identity.
pub fn inc_beta_int(x: f64, a: u32, b: u32) -> f64 {
    let m = a + b - 1;
    (a..=m).map(|j| binom_pmf(j, m, x)).sum()
}

/// Composite Simpson rule with `m` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, m: usize) -> f64 {
    let h = (hi - lo) / m as f64;
    let mut s = f(lo) + f(hi);
    for k in 1..m {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(lo + k as f64 * h);
    }
    s * h / 3.0
}

fn kernel(x: f64, a: f64, b: f64) -> f64 {
    x.powf(a - 1.0) * (1.0 - x).powf(b - 1.0)
}

/// 1 − ∫√(p q) with every integral taken by quadrature.
pub fn hellinger_quad(p: &BetaShapes, q: &BetaShapes) -> f64 {
    const M: usize = 20_000;
    let bp = simpson(|x| kernel(x, p.alpha, p.beta), 0.0, 1.0, M);
    let bq = simpson(|x| kernel(x, q.alpha, q.beta), 0.0, 1.0, M);
    let cross = simpson(
        |x| (kernel(x, p.alpha, p.beta) * kernel(x, q.alpha, q.beta)).sqrt(),
        0.0,
        1.0,
        M,
    );
    1.0 - cross / (bp * bq).sqrt()
}

/// Jensen-Shannon divergence by quadrature of the definition.
pub fn jsd_quad(p: &BetaShapes, q: &BetaShapes) -> f64 {
    const M: usize = 20_000;
    let bp = simpson(|x| kernel(x, p.alpha, p.beta), 0.0, 1.0, M);
    let bq = simpson(|x| kernel(x, q.alpha, q.beta), 0.0, 1.0, M);
    let term = |f: f64, m: f64| if f > 0.0 { f * (f / m).ln() } else { 0.0 };
    simpson(
        |x| {
            let f = kernel(x, p.alpha, p.beta) / bp;
            let g = kernel(x, q.alpha, q.beta) / bq;
            let m = 0.5 * (f + g);
            0.5 * (term(f, m) + term(g, m))
        },
        0.0,
        1.0,
        M,
    )
}

/// Operating characteristics computed by a reference.
#[derive(Debug, Clone)]
pub struct RefOc {
    pub reject_prob: Vec<f64>,
    pub fwer: f64,
    pub ewp: f64,
    pub ecd: f64,
}

/// Every stratum analysed alone with a Beta(1, 1) prior.
pub fn single_arm(n: u32, p_star: f64, lambda: f64, rates: &[f64], null_rate: f64) -> RefOc {
    let detect: Vec<bool> = (0..=n).map(|r| inc_beta_int(p_star, 1 + r, 1 + n - r) <= 1.0 - lambda).collect();
    let reject: Vec<f64> = rates
        .iter()
        .map(|&p| (0..=n).filter(|&r| detect[r as usize]).map(|r| binom_pmf(r, n, p)).sum())
        .collect();
    let mut none_inactive = 1.0;
    let mut none_active = 1.0;
    let mut ecd = 0.0;
    for (p, q) in rates.iter().zip(&reject) {
        if *p > null_rate {
            none_active *= 1.0 - q;
            ecd += q;
        } else {
            none_inactive *= 1.0 - q;
            ecd += 1.0 - q;
        }
    }
    let has_active = rates.iter().any(|p| *p > null_rate);
    let has_inactive = rates.iter().any(|p| *p <= null_rate);
    RefOc {
        reject_prob: reject,
        fwer: if has_inactive { 1.0 - none_inactive } else { 0.0 },
        ewp: if has_active { 1.0 - none_active } else { 0.0 },
        ecd,
    }
}

/// Full pooling with Beta(1, 1) priors: every stratum shares the posterior
/// Beta(I + R, I + N − R) of the total response count R.
pub fn pooled(strata: usize, n: u32, p_star: f64, lambda: f64, rates: &[f64], null_rate: f64) -> RefOc {
    let total_n = strata as u32 * n;
    let mut dist = vec![1.0];
    for &p in rates {
        let pmf: Vec<f64> = (0..=n).map(|r| binom_pmf(r, n, p)).collect();
        let mut next = vec![0.0; dist.len() + n as usize];
        for (s, ds) in dist.iter().enumerate() {
            for (r, pr) in pmf.iter().enumerate() {
                next[s + r] += ds * pr;
            }
        }
        dist = next;
    }
    let i = strata as u32;
    let all: f64 = (0..=total_n)
        .filter(|&r| inc_beta_int(p_star, i + r, i + total_n - r) <= 1.0 - lambda)
        .map(|r| dist[r as usize])
        .sum();
    let has_active = rates.iter().any(|p| *p > null_rate);
    let has_inactive = rates.iter().any(|p| *p <= null_rate);
    let ecd = rates
        .iter()
        .map(|p| if *p > null_rate { all } else { 1.0 - all })
        .sum();
    RefOc {
        reject_prob: vec![all; strata],
        fwer: if has_inactive { all } else { 0.0 },
        ewp: if has_active { all } else { 0.0 },
        ecd,
    }
}

/// Cache-free single-threaded enumeration of every outcome vector with the
/// borrowing rule written out directly.
pub fn naive_exact(design: &Design, phi: &TuningParams, rates: &[f64], null_rate: f64) -> RefOc {
    let strata = design.strata();
    let n = &design.sample_sizes;
    let unaltered = |i: usize, r: u32| BetaShapes {
        alpha: design.prior_a[i] + f64::from(r),
        beta: design.prior_b[i] + f64::from(n[i] - r),
    };
    let mut reject = vec![0.0; strata];
    let (mut fwer, mut ewp, mut ecd) = (0.0, 0.0, 0.0);
    let mut r = vec![0u32; strata];
    loop {
        let prob: f64 = (0..strata).map(|i| binom_pmf(r[i], n[i], rates[i])).product();
        let mut any_false = false;
        let mut any_true = false;
        let mut correct = 0.0;
        for i in 0..strata {
            let (mut a, mut b) = (0.0, 0.0);
            for j in 0..strata {
                let w = if i == j {
                    1.0
                } else {
                    let (p, q) = (unaltered(i, r[i]), unaltered(j, r[j]));
                    let d = match design.divergence {
                        DivergenceKind::Jsd => jsd(&p, &q).unwrap(),
                        DivergenceKind::Hellinger => hellinger_quad(&p, &q),
                    };
                    let raw = (1.0 - d).clamp(0.0, 1.0).powf(phi.epsilon);
                    if raw > phi.tau {
                        raw
                    } else {
                        0.0
                    }
                };
                let u = unaltered(j, r[j]);
                a += w * u.alpha;
                b += w * u.beta;
            }
            let cdf = reg_inc_beta(design.target_rates[i], BetaShapes { alpha: a, beta: b }).unwrap();
            let detected = cdf <= 1.0 - phi.lambda;
            let active = rates[i] > null_rate;
            if detected {
                reject[i] += prob;
            }
            if detected && active {
                any_true = true;
            }
            if detected && !active {
                any_false = true;
            }
            if detected == active {
                correct += 1.0;
            }
        }
        if any_false {
            fwer += prob;
        }
        if any_true {
            ewp += prob;
        }
        ecd += prob * correct;

        let mut k = 0;
        loop {
            if k == strata {
                return RefOc {
                    reject_prob: reject,
                    fwer,
                    ewp,
                    ecd,
                };
            }
            if r[k] < n[k] {
                r[k] += 1;
                break;
            }
            r[k] = 0;
            k += 1;
        }
    }
}

/// Largest absolute difference between two measure lists.
pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Every measure of a reference and an engine result as paired lists.
pub fn measures(r: &RefOc) -> Vec<f64> {
    let mut v = r.reject_prob.clone();
    v.extend([r.fwer, r.ewp, r.ecd]);
    v
}

/// Optimum of the calibration objective, a grid point of the default grids.
pub const CALIBRATION_CENTRE: [f64; 3] = [0.6, 10.0, 0.4];
/// Optimum lying between default grid points.
pub const OFF_GRID_CENTRE: [f64; 3] = [0.63, 7.3, 0.47];
pub const CALIBRATION_SEEDS: std::ops::Range<u64> = 1856..1906;
const WIDTHS: [f64; 3] = [1.0, 25.0, 1.0];

/// Separable quadratic scaled by the default box widths.
pub fn calibration_objective(c: [f64; 3]) -> impl Fn(&[f64]) -> basketopt_core::Result<f64> + Sync {
    move |x: &[f64]| Ok(-(0..3).map(|d| ((x[d] - c[d]) / WIDTHS[d]).powi(2)).sum::<f64>())
}

/// Within 0.05 of `c` in every box-normalized coordinate.
pub fn near(x: &[f64], c: [f64; 3]) -> bool {
    (0..3).all(|d| ((x[d] - c[d]) / WIDTHS[d]).abs() <= 0.05)
}

/// Stochastic optimizers with their frozen calibration pass counts (of 50).
pub fn calibration_goldens() -> Vec<(basketopt_core::Algorithm, usize)> {
    use basketopt_core::Algorithm;
    vec![
        (Algorithm::SaBounded { t_start: 100.0 }, 50),
        (Algorithm::SaBounded { t_start: 10.0 }, 50),
        (Algorithm::SaBounded { t_start: 1.0 }, 50),
        (Algorithm::SaUnbounded { t_start: 10.0 }, 49),
        (Algorithm::de(), 50),
        (Algorithm::gwo(), 50),
    ]
}
