//! Operating characteristics of the borrowing design: per-stratum rejection
//! probabilities, family-wise error rate, experiment-wise power and expected
//! number of correct decisions.

mod exact;
mod mc;
pub mod rng;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::design::{BasketModel, Design, TuningParams};
use crate::error::{Error, Result};

pub use exact::{representative_key, ExactEngine, DEFAULT_OUTCOME_CEILING};
pub use mc::{mcse, McConfig, McEngine, DEFAULT_N_MC};

/// True response rates of every stratum plus the rate below which a stratum
/// counts as inactive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub rates: Vec<f64>,
    pub null_rate: f64,
    #[serde(default)]
    pub label: String,
    /// Reported in evaluation tables but never optimized over.
    #[serde(default)]
    pub evaluation_only: bool,
}

impl Scenario {
    pub fn new(rates: Vec<f64>, null_rate: f64, label: impl Into<String>) -> Self {
        Scenario {
            rates,
            null_rate,
            label: label.into(),
            evaluation_only: false,
        }
    }

    pub fn evaluation_only(mut self) -> Self {
        self.evaluation_only = true;
        self
    }

    /// Stratum i is active iff p_i > p0.
    pub fn is_active(&self, stratum: usize) -> bool {
        self.rates[stratum] > self.null_rate
    }

    pub fn active(&self) -> Vec<bool> {
        (0..self.rates.len()).map(|i| self.is_active(i)).collect()
    }

    pub fn active_count(&self) -> usize {
        self.active().iter().filter(|a| **a).count()
    }

    pub fn is_global_null(&self) -> bool {
        self.active_count() == 0
    }

    pub(crate) fn active_mask(&self) -> u64 {
        (0..self.rates.len())
            .filter(|&i| self.is_active(i))
            .fold(0, |m, i| m | 1 << i)
    }

    pub fn validate_for(&self, design: &Design) -> Result<()> {
        if self.rates.len() != design.strata() {
            return Err(Error::Domain(format!(
                "scenario `{}` has {} rates, design has {} strata",
                self.label,
                self.rates.len(),
                design.strata()
            )));
        }
        if let Some(p) = self.rates.iter().chain([&self.null_rate]).find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Domain(format!("scenario `{}`: rate {p} outside [0, 1]", self.label)));
        }
        Ok(())
    }

    /// Identity used to deduplicate scenario evaluations.
    pub(crate) fn rate_bits(&self) -> Vec<u64> {
        self.rates.iter().chain([&self.null_rate]).map(|p| p.to_bits()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Exact,
    MonteCarlo,
}

/// Monte-Carlo standard errors attached to a simulated [`OCResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mcse {
    pub reject_prob: Vec<f64>,
    pub fwer: f64,
    pub ewp: f64,
    pub ecd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OCResult {
    pub reject_prob: Vec<f64>,
    pub fwer: f64,
    pub ewp: f64,
    pub ecd: f64,
    pub active: Vec<bool>,
    pub mcse: Option<Mcse>,
    pub backend: BackendKind,
    /// Total probability mass visited by exact enumeration (≈ 1).
    pub probability_mass: Option<f64>,
}

impl OCResult {
    /// Type-I error rates of the inactive strata.
    pub fn toer(&self) -> impl Iterator<Item = f64> + '_ {
        self.reject_prob
            .iter()
            .zip(&self.active)
            .filter(|(_, a)| !**a)
            .map(|(p, _)| *p)
    }

    /// Powers of the active strata.
    pub fn power(&self) -> impl Iterator<Item = f64> + '_ {
        self.reject_prob
            .iter()
            .zip(&self.active)
            .filter(|(_, a)| **a)
            .map(|(p, _)| *p)
    }

    pub fn max_toer(&self) -> Option<f64> {
        self.toer().reduce(f64::max)
    }

    /// ECD recomputed from the marginal rejection probabilities.
    pub fn ecd_from_marginals(&self) -> f64 {
        self.reject_prob
            .iter()
            .zip(&self.active)
            .map(|(p, a)| if *a { *p } else { 1.0 - *p })
            .sum()
    }
}

/// Which engine computes operating characteristics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EvalBackend {
    Exact,
    MonteCarlo {
        #[serde(default = "default_n_mc")]
        n_mc: usize,
        #[serde(default)]
        base_seed: u64,
        /// Reuse the base seed for every evaluation so the objective is a
        /// deterministic function of φ.
        #[serde(default = "default_true")]
        common_random_numbers: bool,
    },
}

fn default_n_mc() -> usize {
    DEFAULT_N_MC
}

fn default_true() -> bool {
    true
}

impl Default for EvalBackend {
    fn default() -> Self {
        EvalBackend::Exact
    }
}

impl EvalBackend {
    pub fn monte_carlo(n_mc: usize, base_seed: u64) -> Self {
        EvalBackend::MonteCarlo {
            n_mc,
            base_seed,
            common_random_numbers: true,
        }
    }
}

enum Inner {
    Exact(ExactEngine),
    MonteCarlo(McEngine, bool),
}

/// Backend-agnostic evaluator with a counter of scenario evaluations.
pub struct OcEngine {
    inner: Inner,
    backend: EvalBackend,
    evaluations: AtomicU64,
}

impl OcEngine {
    pub fn new(model: Arc<BasketModel>, backend: EvalBackend) -> Result<Self> {
        Self::with_ceiling(model, backend, DEFAULT_OUTCOME_CEILING)
    }

    pub fn with_ceiling(model: Arc<BasketModel>, backend: EvalBackend, ceiling: u128) -> Result<Self> {
        let inner = match backend {
            EvalBackend::Exact => {
                let engine = ExactEngine::new(model).with_ceiling(ceiling);
                engine.check_ceiling()?;
                Inner::Exact(engine)
            }
            EvalBackend::MonteCarlo {
                n_mc,
                base_seed,
                common_random_numbers,
            } => Inner::MonteCarlo(McEngine::new(model, McConfig::new(n_mc, base_seed)?), common_random_numbers),
        };
        Ok(OcEngine {
            inner,
            backend,
            evaluations: AtomicU64::new(0),
        })
    }

    pub fn backend(&self) -> EvalBackend {
        self.backend
    }

    pub fn model(&self) -> &Arc<BasketModel> {
        match &self.inner {
            Inner::Exact(e) => e.model(),
            Inner::MonteCarlo(e, _) => e.model(),
        }
    }

    /// Number of scenario evaluations performed so far.
    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    pub fn evaluate(&self, phi: &TuningParams, scenario: &Scenario) -> Result<OCResult> {
        Ok(self.evaluate_many(phi, std::slice::from_ref(scenario))?.remove(0))
    }

    /// Evaluates every scenario once, sharing the per-φ decision work.
    pub fn evaluate_many(&self, phi: &TuningParams, scenarios: &[Scenario]) -> Result<Vec<OCResult>> {
        self.evaluations.fetch_add(scenarios.len() as u64, Ordering::Relaxed);
        match &self.inner {
            Inner::Exact(e) => e.evaluate_many(phi, scenarios),
            Inner::MonteCarlo(e, crn) => {
                let seed = if *crn {
                    e.config().base_seed
                } else {
                    rng::seed_for_point(e.config().base_seed, &phi.to_array())
                };
                e.evaluate_many_seeded(phi, scenarios, seed)
            }
        }
    }
}
