//! Constrained optimization by linear approximations, box bounds only.

use std::cell::RefCell;
use std::time::Instant;

use cobyla::{minimize, RhoBeg, StopTols};

use super::{sanitize, OptimizerResult, Recorder, SearchBox};
use crate::error::{Error, Result};

/// Relative step tolerance that ends the run.
pub const COBYLA_XTOL: f64 = 1e-6;

/// Stand-in for −∞ handed to the minimizer, which needs finite values.
const FLOOR: f64 = 1e300;

/// Maximizes from `start`; deterministic, at most `budget` evaluations.
pub fn cobyla<F>(objective: &F, b: &SearchBox, budget: usize, start: &[f64]) -> Result<OptimizerResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let started = Instant::now();
    b.validate()?;
    if start.len() != b.dim() || !b.contains(start) {
        return Err(Error::Config("start point must lie inside the box".into()));
    }
    let rec = RefCell::new(Recorder::new(budget));
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let loss = |x: &[f64], _: &mut ()| {
        if failure.borrow().is_some() || rec.borrow().n_evals >= budget {
            return FLOOR;
        }
        // the linear models may step marginally outside the bounds
        let mut p = x.to_vec();
        b.clip(&mut p);
        match objective(&p) {
            Ok(v) => {
                let v = sanitize(v);
                rec.borrow_mut().record(&p, v, true, true);
                if v.is_finite() {
                    -v
                } else {
                    FLOOR
                }
            }
            Err(e) => {
                *failure.borrow_mut() = Some(e);
                FLOOR
            }
        }
    };
    let bounds: Vec<(f64, f64)> = b.lower.iter().copied().zip(b.upper.iter().copied()).collect();
    let rho = (0..b.dim()).map(|d| 0.1 * b.width(d)).collect();
    let tols = StopTols {
        xtol_rel: COBYLA_XTOL,
        ..StopTols::default()
    };
    let no_constraints: &[fn(&[f64], &mut ()) -> f64] = &[];
    // status is irrelevant: the best evaluated point is taken from the trace
    let _ = minimize(loss, start, &bounds, no_constraints, (), budget, RhoBeg::Set(rho), Some(tols));
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(rec.into_inner().finish("cobyla".into(), 0, started))
}
