//! Derivative-free maximizers over the (λ, ε, τ) box.
//!
//! Every optimizer maximizes. Objective errors abort the run; NaN values are
//! treated as −∞.

mod cobyla;
mod de;
mod grid;
mod gwo;
mod sa;

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::design::{TuningParams, EPSILON_CAP};
use crate::error::{Error, Result};

pub use cobyla::{cobyla, COBYLA_XTOL};
pub use de::de;
pub use grid::{default_grids, grid_points, grid_search};
pub use gwo::gwo;
pub use sa::{reflect, sa_bounded, sa_unbounded, T_END};

/// Axis-aligned search region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Default for SearchBox {
    fn default() -> Self {
        SearchBox {
            lower: vec![0.0, 0.0, 0.0],
            upper: vec![1.0, EPSILON_CAP, 1.0],
        }
    }
}

impl SearchBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let b = SearchBox { lower, upper };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() || self.lower.is_empty() {
            return Err(Error::Config("box bounds must be non-empty and of equal length".into()));
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::Config("box needs finite lower < upper in every dimension".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| v >= l && v <= u)
    }

    pub fn width(&self, d: usize) -> f64 {
        self.upper[d] - self.lower[d]
    }

    pub fn clip(&self, x: &mut [f64]) {
        for (d, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[d], self.upper[d]);
        }
    }
}

/// Algorithm and its own settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Algorithm {
    Grid {
        /// Per-dimension grid values; the built-in grids when absent.
        #[serde(default)]
        grids: Option<Vec<Vec<f64>>>,
    },
    SaBounded {
        #[serde(default = "default_temperature")]
        t_start: f64,
    },
    SaUnbounded {
        #[serde(default = "default_temperature")]
        t_start: f64,
    },
    De {
        #[serde(default = "default_pop")]
        pop: usize,
        #[serde(default = "default_f")]
        f: f64,
        #[serde(default = "default_cr")]
        cr: f64,
    },
    Gwo {
        #[serde(default = "default_pop")]
        pop: usize,
    },
    Cobyla,
}

fn default_temperature() -> f64 {
    10.0
}
fn default_pop() -> usize {
    40
}
fn default_f() -> f64 {
    0.8
}
fn default_cr() -> f64 {
    0.5
}
fn default_budget() -> usize {
    1000
}
fn default_seed() -> u64 {
    1856
}

impl Algorithm {
    pub fn grid() -> Self {
        Algorithm::Grid { grids: None }
    }

    pub fn de() -> Self {
        Algorithm::De {
            pop: default_pop(),
            f: default_f(),
            cr: default_cr(),
        }
    }

    pub fn gwo() -> Self {
        Algorithm::Gwo { pop: default_pop() }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, Algorithm::Grid { .. } | Algorithm::Cobyla)
    }

    /// Short label such as `sa_bounded(T=100)`.
    pub fn label(&self) -> String {
        match self {
            Algorithm::Grid { .. } => "grid".into(),
            Algorithm::SaBounded { t_start } => format!("sa_bounded(T={t_start})"),
            Algorithm::SaUnbounded { t_start } => format!("sa_unbounded(T={t_start})"),
            Algorithm::De { .. } => "de".into(),
            Algorithm::Gwo { .. } => "gwo".into(),
            Algorithm::Cobyla => "cobyla".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub algorithm: Algorithm,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Starting point for simulated annealing and COBYLA; (0.2, 0.5, 0) when
    /// absent.
    #[serde(default)]
    pub start: Option<Vec<f64>>,
    #[serde(default, rename = "box")]
    pub search_box: SearchBox,
}

impl OptimizerConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        OptimizerConfig {
            algorithm,
            budget: default_budget(),
            seed: default_seed(),
            start: None,
            search_box: SearchBox::default(),
        }
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_box(mut self, search_box: SearchBox) -> Self {
        self.search_box = search_box;
        self
    }

    pub fn with_start(mut self, start: Vec<f64>) -> Self {
        self.start = Some(start);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.search_box.validate()?;
        if self.budget == 0 {
            return Err(Error::Config("budget must be positive".into()));
        }
        match &self.algorithm {
            Algorithm::Grid { grids: Some(g) } => {
                if g.len() != self.search_box.dim() || g.iter().any(|v| v.is_empty()) {
                    return Err(Error::Config("one non-empty grid per dimension is required".into()));
                }
            }
            Algorithm::SaBounded { t_start } | Algorithm::SaUnbounded { t_start } => {
                if !(*t_start > 0.0 && t_start.is_finite()) {
                    return Err(Error::Config(format!("start temperature must be positive, got {t_start}")));
                }
            }
            Algorithm::De { pop, f, cr } => {
                if *pop < 4 {
                    return Err(Error::Config("differential evolution needs a population of at least 4".into()));
                }
                if !(*f > 0.0 && (0.0..=1.0).contains(cr)) {
                    return Err(Error::Config("need F > 0 and CR in [0, 1]".into()));
                }
                check_population_budget(*pop, self.budget)?;
            }
            Algorithm::Gwo { pop } => {
                if *pop < 3 {
                    return Err(Error::Config("grey wolf optimizer needs a population of at least 3".into()));
                }
                check_population_budget(*pop, self.budget)?;
            }
            Algorithm::Grid { grids: None } | Algorithm::Cobyla => {}
        }
        if let Some(s) = &self.start {
            if s.len() != self.search_box.dim() || !self.search_box.contains(s) {
                return Err(Error::Config("start point must lie inside the box".into()));
            }
        }
        Ok(())
    }

    fn start_point(&self) -> Vec<f64> {
        self.start.clone().unwrap_or_else(|| {
            let mut s = vec![0.2, 0.5, 0.0];
            s.resize(self.search_box.dim(), 0.0);
            self.search_box.clip(&mut s);
            s
        })
    }
}

fn check_population_budget(pop: usize, budget: usize) -> Result<()> {
    if budget < 2 * pop {
        return Err(Error::Config(format!(
            "budget {budget} is too small for one generation of population {pop}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub index: usize,
    pub point: Vec<f64>,
    pub value: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerResult {
    pub algorithm: String,
    pub phi_star: Vec<f64>,
    pub u_star: f64,
    /// Objective calls.
    pub n_evals: usize,
    /// Budget steps consumed, including proposals rejected without evaluation.
    pub n_steps: usize,
    pub trace: Vec<TraceEntry>,
    /// Best population value per generation (population methods only).
    pub generation_best: Vec<f64>,
    pub wall_time_s: f64,
    pub seed: u64,
}

impl OptimizerResult {
    pub fn phi(&self) -> Result<TuningParams> {
        TuningParams::from_slice(&self.phi_star)
    }

    /// Writes the trace as `eval_index,lambda,epsilon,tau,utility,accepted`
    /// (generic `x0,x1,..` columns outside three dimensions).
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let dim = self.phi_star.len();
        let mut header = vec!["eval_index".to_string()];
        if dim == 3 {
            header.extend(["lambda", "epsilon", "tau"].map(String::from));
        } else {
            header.extend((0..dim).map(|d| format!("x{d}")));
        }
        header.extend(["utility", "accepted"].map(String::from));
        w.write_record(&header)?;
        for e in &self.trace {
            let mut row = vec![e.index.to_string()];
            row.extend(e.point.iter().map(|v| format_float(*v)));
            row.push(format_float(e.value));
            row.push(e.accepted.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_trace_csv(&self, path: &Path) -> Result<()> {
        self.write_trace_csv(std::fs::File::create(path)?)
    }
}

/// Float text with 17 significant digits.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub(crate) fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Trace bookkeeping shared by all optimizers.
pub(crate) struct Recorder {
    trace: Vec<TraceEntry>,
    best: Option<(Vec<f64>, f64)>,
    n_evals: usize,
    generation_best: Vec<f64>,
}

impl Recorder {
    pub(crate) fn new(capacity: usize) -> Self {
        Recorder {
            trace: Vec::with_capacity(capacity),
            best: None,
            n_evals: 0,
            generation_best: Vec::new(),
        }
    }

    /// Logs one budget step; `evaluated` is false for proposals scored −∞
    /// without calling the objective.
    pub(crate) fn record(&mut self, point: &[f64], value: f64, accepted: bool, evaluated: bool) {
        self.n_evals += usize::from(evaluated);
        let improves = match &self.best {
            None => true,
            Some((_, b)) => value > *b,
        };
        if improves {
            self.best = Some((point.to_vec(), value));
        }
        self.trace.push(TraceEntry {
            index: self.trace.len(),
            point: point.to_vec(),
            value,
            accepted,
        });
    }

    pub(crate) fn generation(&mut self, best: f64) {
        self.generation_best.push(best);
    }

    pub(crate) fn finish(self, algorithm: String, seed: u64, started: Instant) -> OptimizerResult {
        let (phi_star, u_star) = self.best.unwrap_or((Vec::new(), f64::NEG_INFINITY));
        OptimizerResult {
            algorithm,
            phi_star,
            u_star,
            n_evals: self.n_evals,
            n_steps: self.trace.len(),
            trace: self.trace,
            generation_best: self.generation_best,
            wall_time_s: started.elapsed().as_secs_f64(),
            seed,
        }
    }
}

/// Runs the configured optimizer on `objective`.
pub fn optimize<F>(objective: &F, config: &OptimizerConfig) -> Result<OptimizerResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    config.validate()?;
    let b = &config.search_box;
    match &config.algorithm {
        Algorithm::Grid { grids } => {
            let grids = match grids {
                Some(g) => g.clone(),
                None if b.dim() == 3 => default_grids(),
                None => return Err(Error::Config("built-in grids are three-dimensional".into())),
            };
            let mut r = grid_search(objective, &grids)?;
            r.seed = config.seed;
            Ok(r)
        }
        Algorithm::SaBounded { t_start } => sa_bounded(objective, b, *t_start, config.budget, config.seed, &config.start_point()),
        Algorithm::SaUnbounded { t_start } => {
            sa_unbounded(objective, b, *t_start, config.budget, config.seed, &config.start_point())
        }
        Algorithm::De { pop, f, cr } => de(objective, b, *pop, *f, *cr, config.budget, config.seed),
        Algorithm::Gwo { pop } => gwo(objective, b, *pop, config.budget, config.seed),
        Algorithm::Cobyla => {
            let mut r = cobyla(objective, b, config.budget, &config.start_point())?;
            r.seed = config.seed;
            Ok(r)
        }
    }
}
