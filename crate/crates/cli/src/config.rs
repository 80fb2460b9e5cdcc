//! Run configuration: one JSON document, optionally overridden by flags.

use std::path::{Path, PathBuf};

use basketopt_core::study::{
    default_boundary_designs, default_p2_grid, default_tau_grid, default_toer_phis, parse_list, scenario_library,
    Part1Config, Part23Config, Problem,
};
use basketopt_core::{
    Algorithm, Averaging, Error, EvalBackend, OptimizerConfig, Result, TuningParams, UtilityKind, UtilityParams,
};
use serde::{Deserialize, Serialize};

use crate::commands::Command;

/// Tuning parameters written as `[lambda, epsilon, tau]`, validated on parse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct Phi(pub TuningParams);

impl TryFrom<[f64; 3]> for Phi {
    type Error = String;

    fn try_from(v: [f64; 3]) -> std::result::Result<Self, String> {
        TuningParams::from_slice(&v).map(Phi).map_err(|e| e.to_string())
    }
}

impl From<Phi> for [f64; 3] {
    fn from(p: Phi) -> Self {
        p.0.to_array()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToerCurveConfig {
    pub n: u32,
    pub phis: Vec<Phi>,
    pub p2_grid: Vec<f64>,
}

impl Default for ToerCurveConfig {
    fn default() -> Self {
        ToerCurveConfig {
            n: 24,
            phis: default_toer_phis().into_iter().map(Phi).collect(),
            p2_grid: default_p2_grid(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundaryConfig {
    /// (strata, patients per stratum) pairs.
    pub designs: Vec<(usize, u32)>,
    pub tau_grid: Vec<f64>,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        BoundaryConfig {
            designs: default_boundary_designs(),
            tau_grid: default_tau_grid(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Catalog set for `oc` and `optimize`.
    pub set: String,
    /// Restrict `oc` to one scenario label; all scenarios when absent.
    pub scenario: Option<String>,
    pub phi: Phi,
    pub backend: EvalBackend,
    /// Utility optimized by `optimize`.
    pub utility: Problem,
    pub params: UtilityParams,
    pub optimizer: OptimizerConfig,
    pub benchmark: Part1Config,
    pub study: Part23Config,
    pub toer_curve: ToerCurveConfig,
    pub boundary: BoundaryConfig,
    /// Worker threads; available parallelism when absent.
    pub workers: Option<usize>,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            set: "1".into(),
            scenario: None,
            phi: Phi(TuningParams {
                lambda: 0.99,
                epsilon: 2.0,
                tau: 0.0,
            }),
            backend: EvalBackend::Exact,
            utility: Problem {
                kind: UtilityKind::TwoEwp,
                averaging: Averaging::ScenarioAveraged,
            },
            params: UtilityParams::default(),
            optimizer: OptimizerConfig::new(Algorithm::de()),
            benchmark: Part1Config::default(),
            study: Part23Config::default(),
            toer_curve: ToerCurveConfig::default(),
            boundary: BoundaryConfig::default(),
            workers: None,
            out_dir: PathBuf::from("basketopt-out"),
        }
    }
}

/// Flag values that override the configuration document.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub set: Option<String>,
    pub scenario: Option<String>,
    pub phi: Option<String>,
    pub backend: Option<String>,
    pub seed: Option<u64>,
    pub n_mc: Option<usize>,
    pub budget: Option<usize>,
    pub workers: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

/// Parses a configuration document, reporting the JSON path of any error.
pub fn parse_str(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Config(format!("at `{path}`: {}", e.into_inner()))
    })
}

pub fn load(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_str(&text)
}

fn set_backend_seed(b: &mut EvalBackend, seed: u64) {
    if let EvalBackend::MonteCarlo { base_seed, .. } = b {
        *base_seed = seed;
    }
}

fn set_backend_n_mc(b: &mut EvalBackend, n: usize) {
    if let EvalBackend::MonteCarlo { n_mc, .. } = b {
        *n_mc = n;
    }
}

impl RunConfig {
    /// Applies flag overrides. `--set`, `--seed`, `--n-mc` and `--budget`
    /// reach every section that has the corresponding setting.
    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(set) = &o.set {
            self.set = set.clone();
            self.benchmark.set_id = set.clone();
            self.study.set_ids = vec![set.clone()];
        }
        if let Some(s) = &o.scenario {
            self.scenario = Some(s.clone());
        }
        if let Some(text) = &o.phi {
            let v = parse_list(text)?;
            self.phi = TuningParams::from_slice(&v)
                .map(Phi)
                .map_err(|e| Error::Config(format!("--phi: {e}")))?;
        }
        if let Some(kind) = &o.backend {
            match kind.as_str() {
                "exact" => {
                    self.backend = EvalBackend::Exact;
                    self.benchmark.backend = EvalBackend::Exact;
                }
                "mc" | "monte_carlo" | "monte-carlo" => {
                    if !matches!(self.backend, EvalBackend::MonteCarlo { .. }) {
                        self.backend = EvalBackend::monte_carlo(basketopt_core::oc::DEFAULT_N_MC, 1856);
                    }
                    if !matches!(self.benchmark.backend, EvalBackend::MonteCarlo { .. }) {
                        self.benchmark.backend = EvalBackend::monte_carlo(250, 1856);
                    }
                    // every study set simulated
                    self.study.exact_ceiling = 0;
                }
                other => return Err(Error::Config(format!("--backend: expected `exact` or `mc`, got `{other}`"))),
            }
        }
        if let Some(seed) = o.seed {
            self.optimizer.seed = seed;
            set_backend_seed(&mut self.backend, seed);
            self.benchmark.first_seed = seed;
            set_backend_seed(&mut self.benchmark.backend, seed);
            self.study.optimizer.seed = seed;
            self.study.mc_seed = seed;
        }
        if let Some(n) = o.n_mc {
            set_backend_n_mc(&mut self.backend, n);
            set_backend_n_mc(&mut self.benchmark.backend, n);
            self.study.n_mc = n;
        }
        if let Some(b) = o.budget {
            self.optimizer.budget = b;
            self.benchmark.budget = b;
            self.study.optimizer.budget = b;
        }
        if let Some(w) = o.workers {
            self.workers = Some(w);
        }
        if let Some(d) = &o.out_dir {
            self.out_dir = d.clone();
        }
        Ok(())
    }

    /// Checks the sections `command` reads, naming the offending one.
    pub fn validate(&self, command: Command) -> Result<()> {
        let at = |section: &str, r: Result<()>| r.map_err(|e| Error::Config(format!("{section}: {e}")));
        let set = scenario_library(&self.set).map_err(|e| Error::Config(format!("set: {e}")))?;
        if let Some(label) = &self.scenario {
            if set.scenario(label).is_none() {
                return Err(Error::Config(format!("scenario: set {} has no scenario `{label}`", set.id)));
            }
        }
        if let EvalBackend::MonteCarlo { n_mc: 0, .. } = self.backend {
            return Err(Error::Config("backend.n_mc: must be positive".into()));
        }
        at("params", self.params.validate())?;
        match command {
            Command::Oc => {}
            Command::Optimize => at("optimizer", self.optimizer.validate())?,
            Command::Benchmark => at("benchmark", self.benchmark.validate())?,
            Command::Study => {
                at("study", self.study.validate())?;
                if self.study.n_mc == 0 {
                    return Err(Error::Config("study.n_mc: must be positive".into()));
                }
            }
            Command::ToerCurve => {
                if self.toer_curve.n == 0 || self.toer_curve.p2_grid.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    return Err(Error::Config("toer_curve: need n > 0 and rates in [0, 1]".into()));
                }
            }
            Command::Boundary => {
                if self.boundary.tau_grid.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
                    return Err(Error::Config("boundary.tau_grid: values must lie in (0, 1)".into()));
                }
                if self.boundary.designs.iter().any(|&(s, n)| s < 2 || n == 0) {
                    return Err(Error::Config("boundary.designs: need at least two strata and n > 0".into()));
                }
            }
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers: must be positive".into()));
        }
        Ok(())
    }
}
