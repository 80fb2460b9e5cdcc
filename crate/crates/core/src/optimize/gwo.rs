//! Grey wolf optimizer.

use std::time::Instant;

use rand::Rng;

use super::de::{evaluate_all, uniform_population};
use super::{check_population_budget, OptimizerResult, Recorder, SearchBox};
use crate::error::Result;
use crate::oc::rng;

/// The three best points seen so far, best first.
struct Leaders(Vec<(Vec<f64>, f64)>);

impl Leaders {
    fn offer(&mut self, x: &[f64], u: f64) {
        if self.0.iter().any(|(p, _)| p.as_slice() == x) {
            return;
        }
        let at = self.0.iter().position(|(_, v)| u > *v).unwrap_or(self.0.len());
        if at < 3 {
            self.0.insert(at, (x.to_vec(), u));
            self.0.truncate(3);
        }
    }
}

/// Runs `budget / pop` iterations counting the initial population as the
/// first; the control scalar falls linearly from 2 to 0 over the updates.
pub fn gwo<F>(objective: &F, b: &SearchBox, pop: usize, budget: usize, seed: u64) -> Result<OptimizerResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let started = Instant::now();
    b.validate()?;
    check_population_budget(pop, budget)?;
    let dim = b.dim();
    let iterations = budget / pop;
    let mut g = rng::stream(seed);
    let mut rec = Recorder::new(budget);
    let mut leaders = Leaders(Vec::with_capacity(4));

    let mut xs = uniform_population(&mut g, b, pop);
    let us = evaluate_all(objective, &xs)?;
    for (x, u) in xs.iter().zip(&us) {
        rec.record(x, *u, true, true);
        leaders.offer(x, *u);
    }
    rec.generation(leaders.0[0].1);

    for t in 1..iterations {
        let a = 2.0 * (1.0 - t as f64 / (iterations - 1) as f64);
        let guides: Vec<Vec<f64>> = (0..3)
            .map(|k| leaders.0[k.min(leaders.0.len() - 1)].0.clone())
            .collect();
        for x in xs.iter_mut() {
            for d in 0..dim {
                let mut sum = 0.0;
                for lead in &guides {
                    let big_a = 2.0 * a * g.random::<f64>() - a;
                    let c = 2.0 * g.random::<f64>();
                    let dist = (c * lead[d] - x[d]).abs();
                    sum += lead[d] - big_a * dist;
                }
                x[d] = sum / 3.0;
            }
            b.clip(x);
        }
        let us = evaluate_all(objective, &xs)?;
        for (x, u) in xs.iter().zip(&us) {
            rec.record(x, *u, true, true);
            leaders.offer(x, *u);
        }
        rec.generation(leaders.0[0].1);
    }
    Ok(rec.finish("gwo".into(), seed, started))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iterations_and_monotone_alpha() {
        let obj = |x: &[f64]| Ok(-(x[0] - 0.3).powi(2) - (x[1] - 7.0).powi(2) / 625.0 - (x[2] - 0.9).powi(2));
        let b = SearchBox::default();
        let r = gwo(&obj, &b, 40, 1000, 8).unwrap();
        assert_eq!(r.n_evals, 1000);
        assert_eq!(r.generation_best.len(), 25);
        assert!(r.generation_best.windows(2).all(|w| w[1] >= w[0]));
        assert!(r.trace.iter().all(|e| b.contains(&e.point)));
    }

    #[test]
    fn leaders_keep_three_best() {
        let mut l = Leaders(Vec::new());
        for (i, u) in [0.1, 0.5, 0.3, 0.9, 0.2].iter().enumerate() {
            l.offer(&[i as f64], *u);
        }
        let vals: Vec<f64> = l.0.iter().map(|(_, u)| *u).collect();
        assert_eq!(vals, vec![0.9, 0.5, 0.3]);
    }
}
