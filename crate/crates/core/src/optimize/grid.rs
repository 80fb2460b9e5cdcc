use std::time::Instant;

use rayon::prelude::*;

use super::{sanitize, OptimizerResult, Recorder};
use crate::error::{Error, Result};

/// Built-in λ, ε and τ grids (10 values each).
pub fn default_grids() -> Vec<Vec<f64>> {
    vec![
        vec![0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99, 0.999],
        vec![0.0, 0.5, 1.0, 1.5, 2.0, 5.0, 10.0, 15.0, 20.0, 25.0],
        vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 1.0],
    ]
}

/// Cartesian product of ascending-sorted grids in lexicographic order.
pub fn grid_points(grids: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let sorted: Vec<Vec<f64>> = grids
        .iter()
        .map(|g| {
            let mut g = g.clone();
            g.sort_by(f64::total_cmp);
            g.dedup();
            g
        })
        .collect();
    let mut points = vec![Vec::new()];
    for g in &sorted {
        points = points
            .into_iter()
            .flat_map(|p| {
                g.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    points
}

/// Evaluates every grid point once (in parallel) and returns the first
/// maximizer in lexicographic order.
pub fn grid_search<F>(objective: &F, grids: &[Vec<f64>]) -> Result<OptimizerResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let started = Instant::now();
    if grids.is_empty() || grids.iter().any(|g| g.is_empty()) {
        return Err(Error::Config("grids must be non-empty".into()));
    }
    let points = grid_points(grids);
    let values: Vec<f64> = points
        .par_iter()
        .map(|p| objective(p).map(sanitize))
        .collect::<Result<_>>()?;
    let mut rec = Recorder::new(points.len());
    for (p, v) in points.iter().zip(values) {
        rec.record(p, v, true, true);
    }
    Ok(rec.finish("grid".into(), 0, started))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_has_1000_points() {
        let obj = |_: &[f64]| Ok(1.0);
        let r = grid_search(&obj, &default_grids()).unwrap();
        assert_eq!(r.n_evals, 1000);
        assert_eq!(r.phi_star, vec![0.2, 0.0, 0.0]);
    }

    #[test]
    fn one_dimensional_quadratic() {
        let obj = |x: &[f64]| Ok(-(x[0] - 0.5).powi(2));
        let r = grid_search(&obj, &[default_grids()[0].clone()]).unwrap();
        assert_eq!(r.phi_star, vec![0.5]);
    }

    #[test]
    fn nan_never_wins() {
        let obj = |x: &[f64]| Ok(if x[0] < 0.5 { f64::NAN } else { -x[0] });
        let r = grid_search(&obj, &[vec![0.1, 0.4, 0.6, 0.9]]).unwrap();
        assert_eq!(r.phi_star, vec![0.6]);
    }
}
