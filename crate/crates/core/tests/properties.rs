use std::sync::Arc;

use basketopt_core::oc::{ExactEngine, McConfig, McEngine};
use basketopt_core::optimize::{default_grids, grid_search, reflect};
use basketopt_core::study::{scenario_library, se_of_sd, ScenarioSet, SET_IDS};
use basketopt_core::{BasketModel, Design, Scenario, TuningParams};
use proptest::prelude::*;

fn phi_strategy() -> impl Strategy<Value = TuningParams> {
    (0.0..=1.0f64, 0.0..=25.0f64, 0.0..=1.0f64).prop_map(|(l, e, t)| TuningParams::new(l, e, t).unwrap())
}

fn permutations(len: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..len).collect::<Vec<usize>>()).prop_shuffle()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_are_symmetric_and_bounded(ri in 0u32..=15, rj in 0u32..=15, phi in phi_strategy()) {
        let model = BasketModel::new(Design::balanced(3, 15, 0.2).unwrap()).unwrap();
        let w = model.weight(0, 1, ri, rj, &phi).unwrap();
        prop_assert_eq!(w.to_bits(), model.weight(1, 0, rj, ri, &phi).unwrap().to_bits());
        prop_assert!((0.0..=1.0).contains(&w));
        prop_assert!(w == 0.0 || w > phi.tau);
        prop_assert_eq!(model.weight(2, 2, ri, ri, &phi).unwrap(), 1.0);
    }

    #[test]
    fn decisions_are_permutation_equivariant(
        r in proptest::collection::vec(0u32..=8, 4),
        perm in permutations(4),
        phi in phi_strategy(),
    ) {
        let model = BasketModel::new(Design::balanced(4, 8, 0.2).unwrap()).unwrap();
        let d = model.decide(&r, &phi).unwrap();
        let rp: Vec<u32> = perm.iter().map(|&k| r[k]).collect();
        let dp = model.decide(&rp, &phi).unwrap();
        let expected: Vec<bool> = perm.iter().map(|&k| d[k]).collect();
        prop_assert_eq!(dp, expected);
    }

    #[test]
    fn reflection_stays_in_box(y in -1e3..1e3f64, lo in -5.0..5.0f64, width in 1e-3..10.0f64) {
        let hi = lo + width;
        let v = reflect(y, lo, hi);
        prop_assert!(v >= lo && v <= hi, "{} -> {}", y, v);
        if y >= lo && y <= hi {
            prop_assert!((v - y).abs() <= 1e-9 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn sd_factor_is_pure(s in 1e-3..1e3f64, n in 2usize..1000) {
        let f = se_of_sd(s, n).unwrap().se_unbiased / s;
        let g = se_of_sd(1.0, n).unwrap().se_unbiased;
        prop_assert!((f - g).abs() <= 1e-12 * g);
    }

    #[test]
    fn relabelled_scenario_permutes_exact_oc(
        rates in proptest::collection::vec(prop_oneof![Just(0.2), Just(0.35), Just(0.5)], 3),
        perm in permutations(3),
        phi in phi_strategy(),
    ) {
        let engine = ExactEngine::new(Arc::new(BasketModel::new(Design::balanced(3, 8, 0.2).unwrap()).unwrap()));
        let a = engine.evaluate(&phi, &Scenario::new(rates.clone(), 0.2, "a")).unwrap();
        let permuted: Vec<f64> = perm.iter().map(|&k| rates[k]).collect();
        let b = engine.evaluate(&phi, &Scenario::new(permuted, 0.2, "b")).unwrap();
        for (i, &k) in perm.iter().enumerate() {
            prop_assert!((b.reject_prob[i] - a.reject_prob[k]).abs() < 1e-12);
        }
        prop_assert!((a.fwer - b.fwer).abs() < 1e-12);
        prop_assert!((a.ewp - b.ewp).abs() < 1e-12);
        prop_assert!((a.ecd - b.ecd).abs() < 1e-12);
        prop_assert!((a.ecd - a.ecd_from_marginals()).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn common_random_numbers_make_mc_deterministic(seed in any::<u64>(), phi in phi_strategy()) {
        let model = Arc::new(BasketModel::new(Design::balanced(3, 10, 0.2).unwrap()).unwrap());
        let scenario = Scenario::new(vec![0.2, 0.3, 0.5], 0.2, "x");
        let first = McEngine::new(model.clone(), McConfig::new(200, seed).unwrap());
        let second = McEngine::new(model, McConfig::new(200, seed).unwrap());
        let a = first.evaluate(&phi, &scenario).unwrap();
        let other = TuningParams::new(0.5, 1.0, 0.0).unwrap();
        first.evaluate(&other, &scenario).unwrap();
        prop_assert_eq!(&a, &first.evaluate(&phi, &scenario).unwrap());
        prop_assert_eq!(&a, &second.evaluate(&phi, &scenario).unwrap());
    }

    #[test]
    fn grid_search_matches_nested_loops(c in (0.0..1.0f64, 0.0..25.0f64, 0.0..1.0f64), coarse in any::<bool>()) {
        // rounding to a coarse lattice produces many ties
        let obj = move |x: &[f64]| {
            let v = -(x[0] - c.0).powi(2) - ((x[1] - c.1) / 25.0).powi(2) - (x[2] - c.2).powi(2);
            Ok(if coarse { (v * 10.0).round() } else { v })
        };
        let grids = default_grids();
        let got = grid_search(&obj, &grids).unwrap();
        let (mut best, mut arg) = (f64::NEG_INFINITY, vec![]);
        for &a in &grids[0] {
            for &b in &grids[1] {
                for &t in &grids[2] {
                    let v = obj(&[a, b, t]).unwrap();
                    if v > best {
                        best = v;
                        arg = vec![a, b, t];
                    }
                }
            }
        }
        prop_assert_eq!(got.u_star, best);
        prop_assert_eq!(&got.phi_star, &arg);
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let again = single.install(|| grid_search(&obj, &grids)).unwrap();
        prop_assert_eq!(again.phi_star, got.phi_star);
    }
}

#[test]
fn catalog_round_trips_bit_exactly() {
    for id in SET_IDS {
        let set = scenario_library(id).unwrap();
        let text = serde_json::to_string(&set).unwrap();
        let back: ScenarioSet = serde_json::from_str(&text).unwrap();
        assert_eq!(set, back);
        for (s, t) in set.scenarios.iter().zip(&back.scenarios) {
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&s.rates), bits(&t.rates));
        }
    }
}

#[test]
fn sd_factor_decreases_in_n() {
    let f: Vec<f64> = (2..=1000).map(|n| se_of_sd(1.0, n).unwrap().se_unbiased).collect();
    assert!(f.windows(2).all(|w| w[1] < w[0]));
}
