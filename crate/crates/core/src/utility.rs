//! Utility functions over operating characteristics.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::design::TuningParams;
use crate::error::{Error, Result};
use crate::oc::{OCResult, OcEngine, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UtilityParams {
    pub xi1: f64,
    pub xi2: f64,
    pub xi3: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub eta3: f64,
}

impl Default for UtilityParams {
    fn default() -> Self {
        UtilityParams {
            xi1: 1.0,
            xi2: 1.0,
            xi3: 1000.0,
            eta1: 0.05,
            eta2: 0.1,
            eta3: 0.2,
        }
    }
}

impl UtilityParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("xi1", self.xi1), ("xi2", self.xi2), ("xi3", self.xi3)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("eta1", self.eta1), ("eta2", self.eta2), ("eta3", self.eta3)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityKind {
    /// Experiment-wise power, replaced by −ξ₁·FWER of the null scenario when
    /// that reaches η₁.
    Ewp,
    /// Expected correct decisions with the same null-scenario switch.
    Ecd,
    /// EWP minus a two-level FWER penalty.
    TwoEwp,
    /// Summed power minus two-level per-stratum TOER penalties.
    TwoPow,
}

impl UtilityKind {
    pub const ALL: [UtilityKind; 4] = [UtilityKind::Ewp, UtilityKind::Ecd, UtilityKind::TwoEwp, UtilityKind::TwoPow];

    /// Whether the kind reads FWER from a separate null scenario.
    pub fn needs_null(self) -> bool {
        matches!(self, UtilityKind::Ewp | UtilityKind::Ecd)
    }

    pub fn name(self) -> &'static str {
        match self {
            UtilityKind::Ewp => "ewp",
            UtilityKind::Ecd => "ecd",
            UtilityKind::TwoEwp => "2ewp",
            UtilityKind::TwoPow => "2pow",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    Single,
    ScenarioAveraged,
    /// Scenario average replaced by −ξ₃·(max TOER) once that reaches η₃.
    Penalized,
}

impl Averaging {
    pub const ALL: [Averaging; 3] = [Averaging::Single, Averaging::ScenarioAveraged, Averaging::Penalized];
}

fn step(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

fn two_level(rate: f64, p: &UtilityParams) -> f64 {
    p.xi1 * rate + p.xi2 * (rate - p.eta2) * step(rate - p.eta2)
}

/// Single-scenario utility. `null` carries the FWER scenario for the EWP and
/// ECD kinds and must be absent otherwise.
pub fn u_single(kind: UtilityKind, params: &UtilityParams, oc: &OCResult, null: Option<&OCResult>) -> Result<f64> {
    match (kind.needs_null(), null) {
        (true, None) => return Err(Error::Config(format!("utility `{}` needs a null scenario", kind.name()))),
        (false, Some(_)) => {
            return Err(Error::Config(format!("utility `{}` takes no null scenario", kind.name())))
        }
        _ => {}
    }
    Ok(match kind {
        UtilityKind::Ewp | UtilityKind::Ecd => {
            let fwer = null.unwrap().fwer;
            if fwer >= params.eta1 {
                -params.xi1 * fwer
            } else if kind == UtilityKind::Ewp {
                oc.ewp
            } else {
                oc.ecd
            }
        }
        UtilityKind::TwoEwp => oc.ewp - two_level(oc.fwer, params),
        UtilityKind::TwoPow => oc.power().sum::<f64>() - oc.toer().map(|t| two_level(t, params)).sum::<f64>(),
    })
}

/// Σ w·u in list order.
pub fn weighted_average(weights: &[f64], values: &[f64]) -> f64 {
    weights.iter().zip(values).map(|(w, u)| w * u).sum()
}

/// Penalty switch on the largest type-I error rate `max_toer`.
pub fn penalize(average: f64, max_toer: f64, params: &UtilityParams) -> f64 {
    if max_toer < params.eta3 {
        average
    } else {
        -params.xi3 * max_toer
    }
}

/// A fully specified utility function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilitySpec {
    pub kind: UtilityKind,
    pub averaging: Averaging,
    pub scenarios: Vec<Scenario>,
    #[serde(default)]
    pub null_scenario: Option<Scenario>,
    /// Scenario weights; uniform when empty.
    #[serde(default)]
    pub weights: Vec<f64>,
    #[serde(default)]
    pub params: UtilityParams,
}

impl UtilitySpec {
    pub fn new(kind: UtilityKind, averaging: Averaging, scenarios: Vec<Scenario>, null_scenario: Option<Scenario>) -> Result<Self> {
        let spec = UtilitySpec {
            kind,
            averaging,
            scenarios,
            null_scenario: if kind.needs_null() { null_scenario } else { None },
            weights: Vec::new(),
            params: UtilityParams::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        self.weights = weights;
        self.validate()?;
        Ok(self)
    }

    pub fn with_params(mut self, params: UtilityParams) -> Result<Self> {
        self.params = params;
        self.validate()?;
        Ok(self)
    }

    pub fn name(&self) -> String {
        let prefix = match self.averaging {
            Averaging::Single => "u",
            Averaging::ScenarioAveraged => "ubar",
            Averaging::Penalized => "ubar_pen",
        };
        format!("{prefix}_{}", self.kind.name())
    }

    /// Scenario weights with the uniform default filled in.
    pub fn effective_weights(&self) -> Vec<f64> {
        if self.weights.is_empty() {
            vec![1.0 / self.scenarios.len() as f64; self.scenarios.len()]
        } else {
            self.weights.clone()
        }
    }

    /// Bound on |ū| used to check that the TOER penalty dominates.
    fn magnitude_bound(&self) -> f64 {
        let strata = self.scenarios.first().map_or(0, |s| s.rates.len()) as f64;
        let p = &self.params;
        let two = p.xi1 + p.xi2 * (1.0 - p.eta2);
        match self.kind {
            UtilityKind::Ewp => p.xi1.max(1.0),
            UtilityKind::Ecd => p.xi1.max(strata),
            UtilityKind::TwoEwp => two.max(1.0),
            UtilityKind::TwoPow => strata * two.max(1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.scenarios.is_empty() {
            return Err(Error::Config("utility needs at least one scenario".into()));
        }
        if self.averaging == Averaging::Single && self.scenarios.len() != 1 {
            return Err(Error::Config(format!(
                "single-scenario utility needs exactly one scenario, got {}",
                self.scenarios.len()
            )));
        }
        match (&self.null_scenario, self.kind.needs_null()) {
            (None, true) => return Err(Error::Config(format!("utility `{}` needs a null scenario", self.kind.name()))),
            (Some(_), false) => {
                return Err(Error::Config(format!("utility `{}` takes no null scenario", self.kind.name())))
            }
            (Some(n), true) if !n.is_global_null() => {
                return Err(Error::Config("null scenario must have no active strata".into()))
            }
            _ => {}
        }
        if !self.weights.is_empty() {
            if self.weights.len() != self.scenarios.len() {
                return Err(Error::Config(format!(
                    "{} weights for {} scenarios",
                    self.weights.len(),
                    self.scenarios.len()
                )));
            }
            if self.weights.iter().any(|w| !(*w >= 0.0)) {
                return Err(Error::Config("scenario weights must be nonnegative".into()));
            }
            let total: f64 = self.weights.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::Config(format!("scenario weights sum to {total}, not 1")));
            }
        }
        if self.averaging == Averaging::Penalized {
            let bound = self.magnitude_bound();
            if self.params.xi3 * self.params.eta3 <= bound {
                return Err(Error::Config(format!(
                    "xi3*eta3 = {} does not exceed the utility bound {bound}",
                    self.params.xi3 * self.params.eta3
                )));
            }
        }
        Ok(())
    }
}

/// Utility value together with the operating characteristics behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityEvaluation {
    pub value: f64,
    /// Scenario average before any TOER penalty.
    pub average: f64,
    pub per_scenario: Vec<f64>,
    pub max_toer: f64,
    pub table: Vec<OCResult>,
    pub null: Option<OCResult>,
}

/// Evaluates every distinct scenario of the spec (null included) exactly once.
fn evaluate_table(spec: &UtilitySpec, phi: &TuningParams, engine: &OcEngine) -> Result<(Vec<OCResult>, Option<OCResult>)> {
    let mut slots: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut distinct: Vec<Scenario> = Vec::new();
    let mut index = |s: &Scenario| {
        *slots.entry(s.rate_bits()).or_insert_with(|| {
            distinct.push(s.clone());
            distinct.len() - 1
        })
    };
    let idx: Vec<usize> = spec.scenarios.iter().map(&mut index).collect();
    let null_idx = spec.null_scenario.as_ref().map(&mut index);
    let results = engine.evaluate_many(phi, &distinct)?;
    let table = idx.iter().map(|&i| results[i].clone()).collect();
    Ok((table, null_idx.map(|i| results[i].clone())))
}

fn max_toer(table: &[OCResult]) -> f64 {
    table.iter().flat_map(OCResult::toer).fold(0.0, f64::max)
}

/// Scenario-averaged utility (the single-scenario case is a one-element
/// average) with the per-scenario table.
pub fn u_averaged(spec: &UtilitySpec, phi: &TuningParams, engine: &OcEngine) -> Result<UtilityEvaluation> {
    let (table, null) = evaluate_table(spec, phi, engine)?;
    let per_scenario = table
        .iter()
        .map(|oc| u_single(spec.kind, &spec.params, oc, null.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let average = weighted_average(&spec.effective_weights(), &per_scenario);
    Ok(UtilityEvaluation {
        value: average,
        average,
        per_scenario,
        max_toer: max_toer(&table),
        table,
        null,
    })
}

pub fn u_penalized(spec: &UtilitySpec, phi: &TuningParams, engine: &OcEngine) -> Result<UtilityEvaluation> {
    let mut e = u_averaged(spec, phi, engine)?;
    e.value = penalize(e.average, e.max_toer, &spec.params);
    Ok(e)
}

/// Evaluates a spec according to its averaging mode.
pub fn evaluate(spec: &UtilitySpec, phi: &TuningParams, engine: &OcEngine) -> Result<UtilityEvaluation> {
    match spec.averaging {
        Averaging::Single | Averaging::ScenarioAveraged => u_averaged(spec, phi, engine),
        Averaging::Penalized => u_penalized(spec, phi, engine),
    }
}

/// A utility as an objective over raw (λ, ε, τ) points, counting calls.
pub struct UtilityObjective {
    spec: UtilitySpec,
    engine: Arc<OcEngine>,
    calls: AtomicU64,
}

impl UtilityObjective {
    pub fn new(spec: UtilitySpec, engine: Arc<OcEngine>) -> Result<Self> {
        spec.validate()?;
        let design = engine.model().design();
        for s in spec.scenarios.iter().chain(&spec.null_scenario) {
            s.validate_for(design)?;
        }
        Ok(UtilityObjective {
            spec,
            engine,
            calls: AtomicU64::new(0),
        })
    }

    pub fn spec(&self) -> &UtilitySpec {
        &self.spec
    }

    pub fn engine(&self) -> &Arc<OcEngine> {
        &self.engine
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let phi = TuningParams::from_slice(x)?;
        Ok(evaluate(&self.spec, &phi, &self.engine)?.value)
    }

    pub fn details(&self, phi: &TuningParams) -> Result<UtilityEvaluation> {
        evaluate(&self.spec, phi, &self.engine)
    }

    /// Number of utility evaluations so far.
    pub fn utility_calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    /// Number of scenario operating-characteristic evaluations so far.
    pub fn oc_evaluations(&self) -> u64 {
        self.engine.evaluations()
    }
}
