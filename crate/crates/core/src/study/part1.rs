//! Optimizer benchmark: every algorithm on every test problem, repeated runs
//! for stochastic algorithms, summary statistics and the selection verdict.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::catalog::scenario_library;
use super::stats::Summary;
use crate::design::BasketModel;
use crate::error::{Error, Result};
use crate::oc::{mcse, rng, EvalBackend, OcEngine};
use crate::optimize::{format_float, optimize, Algorithm, OptimizerConfig, OptimizerResult};
use crate::utility::{Averaging, UtilityKind, UtilityObjective};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Problem {
    pub kind: UtilityKind,
    pub averaging: Averaging,
}

impl Problem {
    pub fn name(&self) -> String {
        let prefix = match self.averaging {
            Averaging::Single => "u",
            Averaging::ScenarioAveraged => "ubar",
            Averaging::Penalized => "ubar_pen",
        };
        format!("{prefix}_{}", self.kind.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Part1Config {
    pub set_id: String,
    pub problems: Vec<Problem>,
    pub algorithms: Vec<Algorithm>,
    pub n_runs: usize,
    pub first_seed: u64,
    pub budget: usize,
    pub backend: EvalBackend,
    /// Runs within this distance of the best run count as reliable.
    pub reliability_tolerance: f64,
    /// Rates must exceed this to pass a selection stage.
    pub pass_rate: f64,
}

pub fn default_algorithms() -> Vec<Algorithm> {
    vec![
        Algorithm::grid(),
        Algorithm::SaBounded { t_start: 100.0 },
        Algorithm::SaBounded { t_start: 10.0 },
        Algorithm::SaBounded { t_start: 1.0 },
        Algorithm::SaUnbounded { t_start: 10.0 },
        Algorithm::de(),
        Algorithm::gwo(),
        Algorithm::Cobyla,
    ]
}

impl Default for Part1Config {
    /// Desk-scale profile: five runs, simulated utilities with 250 datasets.
    fn default() -> Self {
        Part1Config {
            set_id: "2".into(),
            problems: vec![
                Problem {
                    kind: UtilityKind::TwoEwp,
                    averaging: Averaging::ScenarioAveraged,
                },
                Problem {
                    kind: UtilityKind::Ecd,
                    averaging: Averaging::ScenarioAveraged,
                },
            ],
            algorithms: default_algorithms(),
            n_runs: 5,
            first_seed: 1856,
            budget: 1000,
            backend: EvalBackend::monte_carlo(250, 1856),
            reliability_tolerance: 0.01,
            pass_rate: 0.99,
        }
    }
}

impl Part1Config {
    /// Full protocol: fifty runs with exact utilities (days of compute).
    pub fn full_protocol() -> Self {
        Part1Config {
            n_runs: 50,
            backend: EvalBackend::Exact,
            ..Part1Config::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_runs == 0 {
            return Err(Error::Config("n_runs must be positive".into()));
        }
        if self.problems.is_empty() || self.algorithms.is_empty() {
            return Err(Error::Config("need at least one problem and one algorithm".into()));
        }
        for a in &self.algorithms {
            OptimizerConfig::new(a.clone()).with_budget(self.budget).validate()?;
        }
        scenario_library(&self.set_id)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub problem: String,
    pub algorithm: String,
    pub run: usize,
    pub seed: u64,
    pub error: Option<String>,
    pub phi_star: Vec<f64>,
    pub u_star: f64,
    pub utility_calls: u64,
    pub oc_evaluations: u64,
    pub n_steps: usize,
    pub success: Option<bool>,
    pub wall_time_s: f64,
    pub user_time_s: f64,
    pub system_time_s: f64,
    pub max_rss_kb: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub problem: String,
    pub algorithm: String,
    pub deterministic: bool,
    pub runs: usize,
    pub failures: usize,
    pub u_star: Option<Summary>,
    pub lambda: Option<Summary>,
    pub epsilon: Option<Summary>,
    pub tau: Option<Summary>,
    pub mean_utility_calls: f64,
    pub mean_oc_evaluations: f64,
    pub internal_reliability: Option<f64>,
    pub internal_reliability_mcse: Option<f64>,
    pub success_rate: Option<f64>,
    pub success_rate_mcse: Option<f64>,
    /// u* minus the grid reference.
    pub diff_to_grid: Option<Summary>,
    pub mean_wall_time_s: f64,
    pub mean_user_time_s: f64,
    pub mean_system_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    /// Pass internal reliability on every problem.
    pub reliable: Vec<String>,
    /// Of those, pass the success rate on every problem.
    pub successful: Vec<String>,
    /// Fastest by mean wall time among the successful ones.
    pub winner: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: Part1Config,
    pub rng: String,
    pub version: String,
    pub legend: Vec<String>,
    /// Grid-search optimum per problem.
    pub grid_values: Vec<(String, f64)>,
    pub runs: Vec<RunRecord>,
    pub summaries: Vec<AlgorithmSummary>,
    pub verdict: Verdict,
}

pub struct Part1Output {
    pub report: BenchmarkReport,
    /// Full optimizer results, aligned with `report.runs`.
    pub traces: Vec<Option<OptimizerResult>>,
}

#[derive(Clone, Copy, Default)]
struct CpuTimes {
    user: f64,
    system: f64,
    max_rss_kb: i64,
}

fn cpu_times() -> CpuTimes {
    let mut usage = std::mem::MaybeUninit::<libc::rusage>::zeroed();
    // SAFETY: getrusage only writes into the provided struct.
    let rc = unsafe { libc::getrusage(libc::RUSAGE_SELF, usage.as_mut_ptr()) };
    if rc != 0 {
        return CpuTimes::default();
    }
    let u = unsafe { usage.assume_init() };
    let secs = |t: libc::timeval| t.tv_sec as f64 + t.tv_usec as f64 * 1e-6;
    CpuTimes {
        user: secs(u.ru_utime),
        system: secs(u.ru_stime),
        max_rss_kb: u.ru_maxrss as i64,
    }
}

fn legend(config: &Part1Config) -> Vec<String> {
    vec![
        format!(
            "internal reliability: share of runs whose u* is within {} of the best u* of that algorithm and problem",
            config.reliability_tolerance
        ),
        "success: u* >= grid-search optimum of the same problem".into(),
        format!(
            "selection: internal reliability > {p} on every problem, then success rate > {p} on every problem, then lowest mean wall time",
            p = config.pass_rate
        ),
        format!("stochastic runs use seeds {}, {}, ...", config.first_seed, config.first_seed + 1),
        "confidence intervals: mean +/- 1.959964 sd/sqrt(n), only for n >= 2".into(),
        "utility_calls counts utility evaluations; oc_evaluations counts scenario evaluations".into(),
    ]
}

/// Runs the benchmark sequentially (each run uses all workers internally).
pub fn run_part1(config: &Part1Config) -> Result<Part1Output> {
    config.validate()?;
    let set = scenario_library(&config.set_id)?;
    let model = Arc::new(BasketModel::new(set.design.clone())?);
    let mut runs = Vec::new();
    let mut traces = Vec::new();
    let mut grid_values = Vec::new();

    // grid first so that success can be judged against it
    let mut order: Vec<&Algorithm> = config.algorithms.iter().filter(|a| matches!(a, Algorithm::Grid { .. })).collect();
    order.extend(config.algorithms.iter().filter(|a| !matches!(a, Algorithm::Grid { .. })));

    for problem in &config.problems {
        let spec = set.utility(problem.kind, problem.averaging)?;
        let engine = Arc::new(OcEngine::new(model.clone(), config.backend)?);
        let mut grid_value = None;
        for algorithm in &order {
            let repeats = if algorithm.is_deterministic() { 1 } else { config.n_runs };
            for run in 1..=repeats {
                let seed = config.first_seed + run as u64 - 1;
                let objective = UtilityObjective::new(spec.clone(), engine.clone())?;
                let f = |x: &[f64]| objective.value(x);
                let opt = OptimizerConfig::new((*algorithm).clone())
                    .with_budget(config.budget)
                    .with_seed(seed);
                let before = cpu_times();
                let oc_before = engine.evaluations();
                let started = Instant::now();
                let outcome = optimize(&f, &opt);
                let wall = started.elapsed().as_secs_f64();
                let after = cpu_times();
                let mut record = RunRecord {
                    problem: problem.name(),
                    algorithm: algorithm.label(),
                    run,
                    seed,
                    error: None,
                    phi_star: Vec::new(),
                    u_star: f64::NAN,
                    utility_calls: objective.utility_calls(),
                    oc_evaluations: engine.evaluations() - oc_before,
                    n_steps: 0,
                    success: None,
                    wall_time_s: wall,
                    user_time_s: after.user - before.user,
                    system_time_s: after.system - before.system,
                    max_rss_kb: after.max_rss_kb,
                };
                match outcome {
                    Ok(r) => {
                        record.phi_star = r.phi_star.clone();
                        record.u_star = r.u_star;
                        record.n_steps = r.n_steps;
                        if matches!(algorithm, Algorithm::Grid { .. }) {
                            grid_value = Some(r.u_star);
                        }
                        record.success = grid_value.map(|g| r.u_star >= g);
                        traces.push(Some(r));
                    }
                    Err(e) => {
                        record.error = Some(e.to_string());
                        traces.push(None);
                    }
                }
                runs.push(record);
            }
        }
        if let Some(g) = grid_value {
            grid_values.push((problem.name(), g));
        }
    }

    let summaries = summarize(config, &runs, &grid_values);
    let verdict = select(&summaries, config.pass_rate);
    Ok(Part1Output {
        report: BenchmarkReport {
            config: config.clone(),
            rng: rng::RNG_ALGORITHM.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            legend: legend(config),
            grid_values,
            runs,
            summaries,
            verdict,
        },
        traces,
    })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (mut total, mut count) = (0.0, 0usize);
    for v in values {
        total += v;
        count += 1;
    }
    if count == 0 {
        f64::NAN
    } else {
        total / count as f64
    }
}

fn summarize(config: &Part1Config, runs: &[RunRecord], grid_values: &[(String, f64)]) -> Vec<AlgorithmSummary> {
    let mut out = Vec::new();
    for problem in &config.problems {
        let pname = problem.name();
        let grid = grid_values.iter().find(|(p, _)| *p == pname).map(|(_, g)| *g);
        for algorithm in &config.algorithms {
            let label = algorithm.label();
            let all: Vec<&RunRecord> = runs.iter().filter(|r| r.problem == pname && r.algorithm == label).collect();
            let ok: Vec<&RunRecord> = all.iter().copied().filter(|r| r.error.is_none()).collect();
            let u: Vec<f64> = ok.iter().map(|r| r.u_star).collect();
            let component = |d: usize| Summary::of(&ok.iter().map(|r| r.phi_star[d]).collect::<Vec<_>>());
            let n = ok.len();
            let rate = |hits: usize| (n > 0).then(|| hits as f64 / n as f64);
            let best = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let reliable = u.iter().filter(|v| **v >= best - config.reliability_tolerance).count();
            let internal_reliability = rate(reliable);
            let success_rate = grid.and_then(|_| rate(ok.iter().filter(|r| r.success == Some(true)).count()));
            out.push(AlgorithmSummary {
                problem: pname.clone(),
                algorithm: label,
                deterministic: algorithm.is_deterministic(),
                runs: all.len(),
                failures: all.len() - n,
                u_star: Summary::of(&u),
                lambda: component(0),
                epsilon: component(1),
                tau: component(2),
                mean_utility_calls: mean(ok.iter().map(|r| r.utility_calls as f64)),
                mean_oc_evaluations: mean(ok.iter().map(|r| r.oc_evaluations as f64)),
                internal_reliability,
                internal_reliability_mcse: internal_reliability.map(|p| mcse(p, n)),
                success_rate,
                success_rate_mcse: success_rate.map(|p| mcse(p, n)),
                diff_to_grid: grid.and_then(|g| Summary::of(&u.iter().map(|v| v - g).collect::<Vec<_>>())),
                mean_wall_time_s: mean(all.iter().map(|r| r.wall_time_s)),
                mean_user_time_s: mean(all.iter().map(|r| r.user_time_s)),
                mean_system_time_s: mean(all.iter().map(|r| r.system_time_s)),
            });
        }
    }
    out
}

/// Three-stage selection rule; a pure function of the summaries.
pub fn select(summaries: &[AlgorithmSummary], pass_rate: f64) -> Verdict {
    let mut algorithms: Vec<&str> = Vec::new();
    for s in summaries {
        if !algorithms.contains(&s.algorithm.as_str()) {
            algorithms.push(&s.algorithm);
        }
    }
    fn rows<'a>(summaries: &'a [AlgorithmSummary], a: &'a str) -> impl Iterator<Item = &'a AlgorithmSummary> {
        summaries.iter().filter(move |s| s.algorithm == a)
    }
    let passes = |a: &str, pick: fn(&AlgorithmSummary) -> Option<f64>| {
        rows(summaries, a).all(|s| s.failures == 0 && pick(s).is_some_and(|p| p > pass_rate))
    };
    let reliable: Vec<String> = algorithms
        .iter()
        .filter(|a| passes(a, |s| s.internal_reliability))
        .map(|a| a.to_string())
        .collect();
    let successful: Vec<String> = reliable
        .iter()
        .filter(|a| passes(a, |s| s.success_rate))
        .cloned()
        .collect();
    let mut winner: Option<(String, f64)> = None;
    for a in &successful {
        let t = mean(rows(summaries, a).map(|s| s.mean_wall_time_s));
        if winner.as_ref().is_none_or(|(_, best)| t < *best) {
            winner = Some((a.clone(), t));
        }
    }
    Verdict {
        reliable,
        successful,
        winner: winner.map(|(a, _)| a),
    }
}

impl BenchmarkReport {
    /// Copy with every timing-dependent field cleared.
    pub fn without_timing(&self) -> BenchmarkReport {
        let mut r = self.clone();
        for run in &mut r.runs {
            run.wall_time_s = 0.0;
            run.user_time_s = 0.0;
            run.system_time_s = 0.0;
            run.max_rss_kb = 0;
        }
        for s in &mut r.summaries {
            s.mean_wall_time_s = 0.0;
            s.mean_user_time_s = 0.0;
            s.mean_system_time_s = 0.0;
        }
        r.verdict.winner = None;
        r
    }

    /// Hash of the report with timing removed.
    pub fn digest(&self) -> String {
        let text = serde_json::to_string(&self.without_timing()).unwrap_or_default();
        let mut h = DefaultHasher::new();
        text.hash(&mut h);
        format!("{:016x}", h.finish())
    }

    pub fn surviving_algorithms(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in &self.summaries {
            if !out.contains(&s.algorithm) {
                out.push(s.algorithm.clone());
            }
        }
        out.retain(|a| {
            self.summaries
                .iter()
                .filter(|s| &s.algorithm == a)
                .all(|s| s.failures == 0 && s.runs > 0)
        });
        out
    }

    pub fn write_runs_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "problem",
            "algorithm",
            "run",
            "seed",
            "lambda",
            "epsilon",
            "tau",
            "u_star",
            "success",
            "utility_calls",
            "oc_evaluations",
            "n_steps",
            "wall_time_s",
            "user_time_s",
            "system_time_s",
            "max_rss_kb",
            "error",
        ])?;
        for r in &self.runs {
            let phi = |d: usize| r.phi_star.get(d).map_or(String::new(), |v| format_float(*v));
            w.write_record([
                r.problem.clone(),
                r.algorithm.clone(),
                r.run.to_string(),
                r.seed.to_string(),
                phi(0),
                phi(1),
                phi(2),
                format_float(r.u_star),
                r.success.map_or(String::new(), |s| s.to_string()),
                r.utility_calls.to_string(),
                r.oc_evaluations.to_string(),
                r.n_steps.to_string(),
                format_float(r.wall_time_s),
                format_float(r.user_time_s),
                format_float(r.system_time_s),
                r.max_rss_kb.to_string(),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let stats = ["mean", "sd", "se_sd", "ci_low", "ci_high", "min", "max"];
        let mut header: Vec<String> = ["problem", "algorithm", "deterministic", "runs", "failures"].map(String::from).to_vec();
        for q in ["u_star", "lambda", "epsilon", "tau", "diff_to_grid"] {
            header.extend(stats.iter().map(|s| format!("{q}_{s}")));
        }
        header.extend(
            [
                "internal_reliability",
                "internal_reliability_mcse",
                "success_rate",
                "success_rate_mcse",
                "mean_utility_calls",
                "mean_oc_evaluations",
                "mean_wall_time_s",
                "mean_user_time_s",
                "mean_system_time_s",
            ]
            .map(String::from),
        );
        w.write_record(&header)?;
        let opt = |v: Option<f64>| v.map_or(String::new(), format_float);
        for s in &self.summaries {
            let mut row = vec![
                s.problem.clone(),
                s.algorithm.clone(),
                s.deterministic.to_string(),
                s.runs.to_string(),
                s.failures.to_string(),
            ];
            for q in [&s.u_star, &s.lambda, &s.epsilon, &s.tau, &s.diff_to_grid] {
                match q {
                    Some(q) => row.extend([
                        format_float(q.mean),
                        opt(q.sd),
                        opt(q.se_sd),
                        opt(q.ci_low),
                        opt(q.ci_high),
                        format_float(q.min),
                        format_float(q.max),
                    ]),
                    None => row.extend(std::iter::repeat_n(String::new(), stats.len())),
                }
            }
            row.extend([
                opt(s.internal_reliability),
                opt(s.internal_reliability_mcse),
                opt(s.success_rate),
                opt(s.success_rate_mcse),
                format_float(s.mean_utility_calls),
                format_float(s.mean_oc_evaluations),
                format_float(s.mean_wall_time_s),
                format_float(s.mean_user_time_s),
                format_float(s.mean_system_time_s),
            ]);
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(alg: &str, problem: &str, rel: f64, succ: f64, wall: f64) -> AlgorithmSummary {
        AlgorithmSummary {
            problem: problem.into(),
            algorithm: alg.into(),
            deterministic: false,
            runs: 5,
            failures: 0,
            u_star: None,
            lambda: None,
            epsilon: None,
            tau: None,
            mean_utility_calls: 1000.0,
            mean_oc_evaluations: 7000.0,
            internal_reliability: Some(rel),
            internal_reliability_mcse: None,
            success_rate: Some(succ),
            success_rate_mcse: None,
            diff_to_grid: None,
            mean_wall_time_s: wall,
            mean_user_time_s: wall,
            mean_system_time_s: 0.0,
        }
    }

    #[test]
    fn selection_stages() {
        let s = vec![
            summary("a", "p", 1.0, 1.0, 5.0),
            summary("a", "q", 1.0, 1.0, 5.0),
            summary("b", "p", 1.0, 1.0, 2.0),
            summary("b", "q", 0.98, 1.0, 2.0),
            summary("c", "p", 1.0, 1.0, 3.0),
            summary("c", "q", 1.0, 1.0, 3.0),
            summary("d", "p", 1.0, 0.8, 1.0),
            summary("d", "q", 1.0, 1.0, 1.0),
        ];
        let v = select(&s, 0.99);
        assert_eq!(v.reliable, vec!["a", "c", "d"]);
        assert_eq!(v.successful, vec!["a", "c"]);
        assert_eq!(v.winner.as_deref(), Some("c"));
    }

    #[test]
    fn desk_defaults() {
        let c = Part1Config::default();
        assert_eq!(c.algorithms.len(), 8);
        assert_eq!(c.algorithms.iter().filter(|a| a.is_deterministic()).count(), 2);
        assert_eq!(c.problems[0].name(), "ubar_2ewp");
        assert_eq!(c.problems[1].name(), "ubar_ecd");
        c.validate().unwrap();
    }
}
