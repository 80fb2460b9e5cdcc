//! Differential evolution, rand/1/bin.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use super::{check_population_budget, sanitize, OptimizerResult, Recorder, SearchBox};
use crate::error::Result;
use crate::oc::rng::{self, StreamRng};

pub(crate) fn uniform_population(g: &mut StreamRng, b: &SearchBox, pop: usize) -> Vec<Vec<f64>> {
    (0..pop)
        .map(|_| (0..b.dim()).map(|d| b.lower[d] + b.width(d) * g.random::<f64>()).collect())
        .collect()
}

pub(crate) fn evaluate_all<F>(objective: &F, points: &[Vec<f64>]) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    points.par_iter().map(|p| objective(p).map(sanitize)).collect()
}

fn distinct_others(g: &mut StreamRng, pop: usize, skip: usize) -> [usize; 3] {
    let mut picked = [usize::MAX; 3];
    for k in 0..3 {
        loop {
            let c = g.random_range(0..pop);
            if c != skip && !picked[..k].contains(&c) {
                picked[k] = c;
                break;
            }
        }
    }
    picked
}

/// Population `pop` evaluated once, then `(budget − pop) / pop` generations.
/// A trial replaces its parent when it scores at least as well.
pub fn de<F>(objective: &F, b: &SearchBox, pop: usize, f: f64, cr: f64, budget: usize, seed: u64) -> Result<OptimizerResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let started = Instant::now();
    b.validate()?;
    check_population_budget(pop, budget)?;
    let dim = b.dim();
    let mut g = rng::stream(seed);
    let mut rec = Recorder::new(budget);

    let mut xs = uniform_population(&mut g, b, pop);
    let mut us = evaluate_all(objective, &xs)?;
    for (x, u) in xs.iter().zip(&us) {
        rec.record(x, *u, true, true);
    }
    rec.generation(us.iter().copied().fold(f64::NEG_INFINITY, f64::max));

    for _ in 0..(budget - pop) / pop {
        let trials: Vec<Vec<f64>> = (0..pop)
            .map(|i| {
                let [r1, r2, r3] = distinct_others(&mut g, pop, i);
                let forced = g.random_range(0..dim);
                let mut t = xs[i].clone();
                for d in 0..dim {
                    if d == forced || g.random::<f64>() < cr {
                        t[d] = xs[r1][d] + f * (xs[r2][d] - xs[r3][d]);
                    }
                }
                b.clip(&mut t);
                t
            })
            .collect();
        let scores = evaluate_all(objective, &trials)?;
        for (i, (t, v)) in trials.into_iter().zip(scores).enumerate() {
            let accepted = v >= us[i];
            rec.record(&t, v, accepted, true);
            if accepted {
                xs[i] = t;
                us[i] = v;
            }
        }
        rec.generation(us.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    Ok(rec.finish("de".into(), seed, started))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_split_and_box() {
        let obj = |x: &[f64]| Ok(-(x[0] - 0.3).powi(2) - (x[1] - 7.0).powi(2) / 625.0 - (x[2] - 0.9).powi(2));
        let b = SearchBox::default();
        let r = de(&obj, &b, 40, 0.8, 0.5, 1000, 4).unwrap();
        assert_eq!(r.n_evals, 1000);
        assert_eq!(r.generation_best.len(), 25);
        assert!(r.generation_best.windows(2).all(|w| w[1] >= w[0]));
        assert!(r.trace.iter().all(|e| b.contains(&e.point)));
        assert!(de(&obj, &b, 40, 0.8, 0.5, 79, 4).is_err());
    }
}
