mod common;

use std::sync::Arc;

use basketopt_core::distributions::{binom_pmf, hellinger, jsd, reg_inc_beta};
use basketopt_core::oc::ExactEngine;
use basketopt_core::{BasketModel, BetaShapes, Design, Scenario, TuningParams};
use common::*;

fn shapes(a: f64, b: f64) -> BetaShapes {
    BetaShapes::new(a, b).unwrap()
}

#[test]
fn binomial_pmf_matches_big_integers() {
    for n in [1u32, 5, 24, 54] {
        for p in [0.01, 0.15, 0.2, 0.5, 0.93] {
            for k in 0..=n {
                let want = common::binom_pmf(k, n, p);
                let got = binom_pmf(k, n, p).unwrap();
                assert!((got - want).abs() <= 1e-14 * want.max(1e-300) + 1e-300, "{k}/{n} at {p}");
            }
        }
    }
}

#[test]
fn incomplete_beta_matches_integer_identity() {
    for a in [1u32, 2, 7, 25, 49] {
        for b in [1u32, 3, 12, 30] {
            for x in [0.01, 0.1, 0.15, 0.2, 0.5, 0.9] {
                let want = inc_beta_int(x, a, b);
                let got = reg_inc_beta(x, shapes(a as f64, b as f64)).unwrap();
                assert!((got - want).abs() < 1e-12, "I_{x}({a}, {b}): {got} vs {want}");
            }
        }
    }
}

#[test]
fn jsd_matches_quadrature() {
    for (p, q) in [((1.0, 1.0), (3.0, 9.0)), ((5.0, 21.0), (9.0, 17.0)), ((2.0, 30.0), (30.0, 2.0))] {
        let (p, q) = (shapes(p.0, p.1), shapes(q.0, q.1));
        let got = jsd(&p, &q).unwrap();
        let want = jsd_quad(&p, &q);
        assert!((got - want).abs() < 1e-8, "{got} vs {want}");
    }
}

#[test]
fn hellinger_matches_quadrature() {
    let (p, q) = (shapes(4.0, 17.0), shapes(11.0, 3.5));
    assert!((hellinger(&p, &q).unwrap() - hellinger_quad(&p, &q)).abs() < 1e-9);
}

#[test]
fn no_borrowing_is_single_arm() {
    let design = Design::balanced(3, 12, 0.2).unwrap();
    let engine = ExactEngine::new(Arc::new(BasketModel::new(design).unwrap()));
    let rates = vec![0.2, 0.35, 0.5];
    let phi = TuningParams::new(0.9, 3.0, 1.0).unwrap();
    let got = engine.evaluate(&phi, &Scenario::new(rates.clone(), 0.2, "x")).unwrap();
    let want = single_arm(12, 0.2, 0.9, &rates, 0.2);
    let mut g = got.reject_prob.clone();
    g.extend([got.fwer, got.ewp, got.ecd]);
    assert!(max_diff(&g, &measures(&want)) < 1e-12);
}

#[test]
fn exact_matches_naive_enumeration_on_uneven_design() {
    let design = Design::new(vec![4, 6, 5], vec![0.2, 0.2, 0.3]).unwrap();
    let engine = ExactEngine::new(Arc::new(BasketModel::new(design.clone()).unwrap()));
    let rates = vec![0.2, 0.45, 0.3];
    for phi in [(0.8, 1.0, 0.1), (0.95, 3.0, 0.0)] {
        let phi = TuningParams::new(phi.0, phi.1, phi.2).unwrap();
        let got = engine.evaluate(&phi, &Scenario::new(rates.clone(), 0.2, "x")).unwrap();
        let want = naive_exact(&design, &phi, &rates, 0.2);
        let mut g = got.reject_prob.clone();
        g.extend([got.fwer, got.ewp, got.ecd]);
        assert!(max_diff(&g, &measures(&want)) < 1e-12);
    }
}
