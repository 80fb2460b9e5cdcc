//! The seven built-in scenario sets.

use serde::{Deserialize, Serialize};

use crate::design::Design;
use crate::error::{Error, Result};
use crate::oc::Scenario;
use crate::utility::{Averaging, UtilityKind, UtilitySpec};

/// Identifiers accepted by [`scenario_library`].
pub const SET_IDS: [&str; 7] = ["1", "2", "3", "4", "5", "6", "7"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSet {
    pub id: String,
    pub design: Design,
    pub scenarios: Vec<Scenario>,
    pub null_scenario: Scenario,
    /// Weights over the optimization scenarios; uniform when empty.
    #[serde(default)]
    pub weights: Vec<f64>,
}

fn label(k: usize) -> String {
    char::from(b'a' + k as u8).to_string()
}

/// `active` strata at `alt`, the rest at `null`, actives last.
fn with_active(strata: usize, null: f64, alt: f64, active: usize) -> Vec<f64> {
    (0..strata).map(|i| if i + active >= strata { alt } else { null }).collect()
}

fn counted(strata: usize, null: f64, alt: f64, counts: impl IntoIterator<Item = usize>) -> Vec<Scenario> {
    counts
        .into_iter()
        .enumerate()
        .map(|(k, a)| Scenario::new(with_active(strata, null, alt, a), null, label(k)))
        .collect()
}

fn observed(rates: &[f64], null: f64) -> Scenario {
    Scenario::new(rates.to_vec(), null, "observed").evaluation_only()
}

impl ScenarioSet {
    fn build(id: &str, strata: usize, n: u32, null: f64, scenarios: Vec<Scenario>) -> Result<Self> {
        Ok(ScenarioSet {
            id: id.to_string(),
            design: Design::balanced(strata, n, null)?,
            null_scenario: Scenario::new(vec![null; strata], null, "global null"),
            scenarios,
            weights: Vec::new(),
        })
    }

    pub fn strata(&self) -> usize {
        self.design.strata()
    }

    pub fn null_rate(&self) -> f64 {
        self.null_scenario.null_rate
    }

    /// Scenarios used inside utilities (evaluation-only ones excluded).
    pub fn optimization_scenarios(&self) -> Vec<Scenario> {
        self.scenarios.iter().filter(|s| !s.evaluation_only).cloned().collect()
    }

    pub fn scenario(&self, label: &str) -> Option<&Scenario> {
        self.scenarios.iter().find(|s| s.label == label)
    }

    /// Target of the single-scenario utilities: the optimization scenario
    /// with ⌈I/2⌉ active strata.
    pub fn single_target(&self) -> Result<Scenario> {
        let want = self.strata().div_ceil(2);
        self.optimization_scenarios()
            .into_iter()
            .find(|s| s.active_count() == want)
            .ok_or_else(|| Error::Config(format!("set {} has no scenario with {want} active strata", self.id)))
    }

    /// Utility of the given kind and averaging over this set.
    pub fn utility(&self, kind: UtilityKind, averaging: Averaging) -> Result<UtilitySpec> {
        let scenarios = match averaging {
            Averaging::Single => vec![self.single_target()?],
            _ => self.optimization_scenarios(),
        };
        let spec = UtilitySpec::new(kind, averaging, scenarios, Some(self.null_scenario.clone()))?;
        if averaging == Averaging::Single || self.weights.is_empty() {
            Ok(spec)
        } else {
            spec.with_weights(self.weights.clone())
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.design.validate()?;
        if !self.null_scenario.is_global_null() {
            return Err(Error::Config(format!("set {}: null scenario has active strata", self.id)));
        }
        for s in self.scenarios.iter().chain([&self.null_scenario]) {
            s.validate_for(&self.design)?;
        }
        if self.optimization_scenarios().is_empty() {
            return Err(Error::Config(format!("set {} has no optimization scenarios", self.id)));
        }
        Ok(())
    }
}

/// Catalog entry by identifier (`"1"`..`"7"`, optionally prefixed `set`).
pub fn scenario_library(id: &str) -> Result<ScenarioSet> {
    let key = id.trim().trim_start_matches("set").trim_start_matches(['-', '_']);
    match key {
        "1" => ScenarioSet::build(
            "1",
            3,
            24,
            0.2,
            vec![
                Scenario::new(vec![0.2, 0.2, 0.2], 0.2, "a"),
                Scenario::new(vec![0.2, 0.2, 0.5], 0.2, "b"),
                Scenario::new(vec![0.2, 0.5, 0.5], 0.2, "c"),
                Scenario::new(vec![0.5, 0.5, 0.5], 0.2, "d"),
            ],
        ),
        "2" => ScenarioSet::build(
            "2",
            4,
            20,
            0.15,
            vec![
                Scenario::new(vec![0.15, 0.15, 0.15, 0.15], 0.15, "a"),
                Scenario::new(vec![0.15, 0.15, 0.15, 0.4], 0.15, "b"),
                Scenario::new(vec![0.15, 0.15, 0.4, 0.4], 0.15, "c"),
                Scenario::new(vec![0.15, 0.4, 0.4, 0.4], 0.15, "d"),
                Scenario::new(vec![0.4, 0.4, 0.4, 0.4], 0.15, "e"),
                Scenario::new(vec![0.4, 0.4, 0.3, 0.5], 0.15, "f"),
                Scenario::new(vec![0.15, 0.25, 0.35, 0.45], 0.15, "g"),
            ],
        ),
        "3" => ScenarioSet::build("3", 8, 15, 0.15, counted(8, 0.15, 0.45, 0..=8)),
        "4" => {
            let mut s = counted(9, 0.01, 0.10, 0..=9);
            s.push(observed(&[0.056, 0.000, 0.113, 0.143, 0.043, 0.000, 0.286, 0.065, 0.362], 0.01));
            ScenarioSet::build("4", 9, 23, 0.01, s)
        }
        "5" => {
            let mut s = counted(20, 0.10, 0.35, (0..=20).step_by(2));
            s.push(observed(
                &[
                    0.160, 0.174, 0.120, 0.120, 0.167, 0.043, 0.130, 0.304, 0.080, 0.042, 0.200, 0.259, 0.063, 0.115,
                    0.000, 0.174, 0.115, 0.333, 0.091, 0.056,
                ],
                0.10,
            ));
            ScenarioSet::build("5", 20, 24, 0.10, s)
        }
        "6" => {
            let mut s = counted(4, 0.10, 0.35, 0..=4);
            s.push(observed(&[0.156, 0.167, 0.212, 0.205], 0.10));
            ScenarioSet::build("6", 4, 36, 0.10, s)
        }
        "7" => {
            let mut s = counted(3, 0.15, 0.30, 0..=3);
            s.push(observed(&[0.289, 0.315, 0.333], 0.15));
            ScenarioSet::build("7", 3, 54, 0.15, s)
        }
        _ => Err(Error::UnknownScenarioSet(id.to_string())),
    }
}
