//! Exploratory tables: type-I error of a fixed null stratum against a moving
//! neighbour, and the extreme borrowing boundary.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::catalog::{scenario_library, SET_IDS};
use crate::design::{BasketModel, Design, TuningParams, EPSILON_CAP};
use crate::error::{Error, Result};
use crate::oc::{ExactEngine, Scenario};
use crate::optimize::format_float;

/// Response rate of the stratum whose type-I error is tracked.
pub const FIXED_NULL_RATE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToerRow {
    pub p2: f64,
    pub epsilon: f64,
    pub tau: f64,
    pub lambda: f64,
    pub toer: f64,
}

/// p₂ from 0.2 to 1 in steps of 0.05.
pub fn default_p2_grid() -> Vec<f64> {
    (0..=16).map(|k| 0.2 + 0.05 * k as f64).map(|p: f64| (p * 100.0).round() / 100.0).collect()
}

/// λ = 0.99 with ε ∈ {1, 2, 5, 10} and τ ∈ {0, 0.3, 0.5, 1}.
pub fn default_toer_phis() -> Vec<TuningParams> {
    let mut out = Vec::new();
    for epsilon in [1.0, 2.0, 5.0, 10.0] {
        for tau in [0.0, 0.3, 0.5, 1.0] {
            out.push(TuningParams {
                lambda: 0.99,
                epsilon,
                tau,
            });
        }
    }
    out
}

/// Exact type-I error of stratum 1 (rate 0.2) in a two-stratum design with
/// `n` patients each while stratum 2 runs over `p2_grid`.
pub fn toer_curve(n: u32, phis: &[TuningParams], p2_grid: &[f64]) -> Result<Vec<ToerRow>> {
    let design = Design::balanced(2, n, FIXED_NULL_RATE)?;
    let engine = ExactEngine::new(Arc::new(BasketModel::new(design)?));
    let scenarios: Vec<Scenario> = p2_grid
        .iter()
        .map(|&p2| Scenario::new(vec![FIXED_NULL_RATE, p2], FIXED_NULL_RATE, format!("p2={p2}")))
        .collect();
    let mut rows = Vec::new();
    for phi in phis {
        for (p2, oc) in p2_grid.iter().zip(engine.evaluate_many(phi, &scenarios)?) {
            rows.push(ToerRow {
                p2: *p2,
                epsilon: phi.epsilon,
                tau: phi.tau,
                lambda: phi.lambda,
                toer: oc.reject_prob[0],
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRow {
    pub strata: usize,
    pub n: u32,
    pub tau: f64,
    pub epsilon_extreme: f64,
    /// Upper end of the ε search range, for reference.
    pub epsilon_cap: f64,
}

/// (strata, patients per stratum) of every catalog set.
pub fn default_boundary_designs() -> Vec<(usize, u32)> {
    SET_IDS
        .iter()
        .map(|id| {
            let s = scenario_library(id).expect("catalog id");
            (s.strata(), s.design.sample_sizes[0])
        })
        .collect()
}

/// τ from 0.01 to 0.99 in steps of 0.01.
pub fn default_tau_grid() -> Vec<f64> {
    (1..100).map(|k| k as f64 / 100.0).collect()
}

pub fn boundary_curve(designs: &[(usize, u32)], tau_grid: &[f64]) -> Result<Vec<BoundaryRow>> {
    let mut rows = Vec::new();
    for &(strata, n) in designs {
        let model = BasketModel::new(Design::balanced(strata, n, FIXED_NULL_RATE)?)?;
        for &tau in tau_grid {
            rows.push(BoundaryRow {
                strata,
                n,
                tau,
                epsilon_extreme: model.extreme_boundary(tau)?,
                epsilon_cap: EPSILON_CAP,
            });
        }
    }
    Ok(rows)
}

/// Smallest τ on the grid at which the boundary falls to the ε cap or below.
pub fn cap_crossing(rows: &[BoundaryRow], strata: usize, n: u32) -> Option<f64> {
    rows.iter()
        .filter(|r| r.strata == strata && r.n == n && r.epsilon_extreme <= r.epsilon_cap)
        .map(|r| r.tau)
        .reduce(f64::min)
}

pub fn write_toer_csv<W: Write>(rows: &[ToerRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["p2", "epsilon", "tau", "lambda", "toer"])?;
    for r in rows {
        w.write_record([r.p2, r.epsilon, r.tau, r.lambda, r.toer].map(format_float))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_boundary_csv<W: Write>(rows: &[BoundaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["strata", "n", "tau", "epsilon_extreme", "epsilon_cap"])?;
    for r in rows {
        w.write_record([
            r.strata.to_string(),
            r.n.to_string(),
            format_float(r.tau),
            format_float(r.epsilon_extreme),
            format_float(r.epsilon_cap),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Parses `a,b,c` into floats.
pub fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("`{s}` is not a number")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        let g = default_p2_grid();
        assert_eq!(g.len(), 17);
        assert_eq!(g[0], 0.2);
        assert_eq!(g[16], 1.0);
        assert_eq!(default_tau_grid().len(), 99);
    }

    #[test]
    fn boundary_decreases_in_tau() {
        let rows = boundary_curve(&[(3, 24)], &default_tau_grid()).unwrap();
        assert!(rows.windows(2).all(|w| w[1].epsilon_extreme < w[0].epsilon_extreme));
    }

    #[test]
    fn always_detect_curve() {
        let phi = TuningParams::new(0.0, 2.0, 0.3).unwrap();
        for r in toer_curve(10, &[phi], &[0.2, 0.6, 1.0]).unwrap() {
            assert!((r.toer - 1.0).abs() < 1e-12);
        }
    }
}
