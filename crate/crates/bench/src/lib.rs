//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use basketopt_core::{BasketModel, Design, EvalBackend, OcEngine, Result, Scenario, TuningParams};

/// Balanced four-stratum design with 20 patients per stratum.
pub fn four_strata() -> Result<Arc<BasketModel>> {
    Ok(Arc::new(BasketModel::new(Design::balanced(4, 20, 0.2)?)?))
}

pub fn mixed_scenario() -> Scenario {
    Scenario::new(vec![0.2, 0.2, 0.5, 0.5], 0.2, "mixed")
}

pub fn engine(backend: EvalBackend) -> Result<OcEngine> {
    OcEngine::new(four_strata()?, backend)
}

pub fn phi() -> TuningParams {
    TuningParams {
        lambda: 0.95,
        epsilon: 2.0,
        tau: 0.2,
    }
}
