//! Simulated annealing with one objective evaluation per temperature step.
//!
//! Temperatures cool geometrically from `t_start` to [`T_END`] over the
//! budget; proposals add a Gaussian step with standard deviation of a tenth of
//! each box width.

use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{sanitize, OptimizerResult, Recorder, SearchBox};
use crate::error::{Error, Result};
use crate::oc::rng;

/// Temperature reached at the end of the budget.
pub const T_END: f64 = 1e-3;

const STEP_FRACTION: f64 = 0.1;

/// Folds `y` back into `[lower, upper]` by repeated mirror reflection.
pub fn reflect(y: f64, lower: f64, upper: f64) -> f64 {
    let w = upper - lower;
    upper - ((y - lower).rem_euclid(2.0 * w) - w).abs()
}

#[derive(Clone, Copy, PartialEq)]
enum Bounding {
    Reflect,
    Reject,
}

pub fn sa_bounded<F>(objective: &F, b: &SearchBox, t_start: f64, budget: usize, seed: u64, start: &[f64]) -> Result<OptimizerResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    anneal(objective, b, t_start, budget, seed, start, Bounding::Reflect)
}

/// Like [`sa_bounded`] but out-of-box proposals score −∞ without an
/// objective call while still consuming a budget step.
pub fn sa_unbounded<F>(objective: &F, b: &SearchBox, t_start: f64, budget: usize, seed: u64, start: &[f64]) -> Result<OptimizerResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    anneal(objective, b, t_start, budget, seed, start, Bounding::Reject)
}

fn anneal<F>(
    objective: &F,
    b: &SearchBox,
    t_start: f64,
    budget: usize,
    seed: u64,
    start: &[f64],
    bounding: Bounding,
) -> Result<OptimizerResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let started = Instant::now();
    b.validate()?;
    if start.len() != b.dim() || !b.contains(start) {
        return Err(Error::Config("start point must lie inside the box".into()));
    }
    if budget == 0 {
        return Err(Error::Config("budget must be positive".into()));
    }
    let label = match bounding {
        Bounding::Reflect => format!("sa_bounded(T={t_start})"),
        Bounding::Reject => format!("sa_unbounded(T={t_start})"),
    };
    let cooling = if t_start > T_END {
        (T_END / t_start).powf(1.0 / budget as f64)
    } else {
        1.0
    };
    let mut g = rng::stream(seed);
    let mut rec = Recorder::new(budget);
    let mut x = start.to_vec();
    let mut u = sanitize(objective(&x)?);
    rec.record(&x, u, true, true);
    let mut temperature = t_start;
    let mut y = vec![0.0; b.dim()];
    for _ in 1..budget {
        temperature *= cooling;
        for (d, slot) in y.iter_mut().enumerate() {
            let z: f64 = g.sample(StandardNormal);
            *slot = x[d] + STEP_FRACTION * b.width(d) * z;
        }
        let (v, evaluated) = match bounding {
            Bounding::Reflect => {
                for (d, slot) in y.iter_mut().enumerate() {
                    *slot = reflect(*slot, b.lower[d], b.upper[d]);
                }
                (sanitize(objective(&y)?), true)
            }
            Bounding::Reject if b.contains(&y) => (sanitize(objective(&y)?), true),
            Bounding::Reject => (f64::NEG_INFINITY, false),
        };
        let draw: f64 = g.random();
        let accepted = v > f64::NEG_INFINITY && (v >= u || draw < ((v - u) / temperature).exp());
        rec.record(&y, v, accepted, evaluated);
        if accepted {
            x.copy_from_slice(&y);
            u = v;
        }
    }
    Ok(rec.finish(label, seed, started))
}
