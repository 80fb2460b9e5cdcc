//! Subcommand implementations. Each writes its tables plus a JSON metadata
//! envelope into the output directory and returns the written paths.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use basketopt_core::oc::rng::RNG_ALGORITHM;
use basketopt_core::optimize::{format_float, optimize};
use basketopt_core::study::{
    boundary_curve, run_part1, run_part2_3, scenario_library, toer_curve, write_boundary_csv, write_toer_csv,
};
use basketopt_core::utility::UtilityEvaluation;
use basketopt_core::{
    BasketModel, Error, EvalBackend, OCResult, OcEngine, OptimizerResult, Result, Scenario, TuningParams,
    UtilityObjective,
};
use serde::Serialize;

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Oc,
    Optimize,
    Benchmark,
    Study,
    Boundary,
    ToerCurve,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Oc => "oc",
            Command::Optimize => "optimize",
            Command::Benchmark => "benchmark",
            Command::Study => "study",
            Command::Boundary => "boundary",
            Command::ToerCurve => "toer-curve",
        }
    }
}

/// Metadata written next to every table.
#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub command: &'a str,
    pub version: &'a str,
    pub rng: &'a str,
    pub seeds: BTreeMap<&'static str, u64>,
    pub workers: usize,
    pub config: &'a RunConfig,
    pub result: T,
}

fn seeds(command: Command, cfg: &RunConfig) -> BTreeMap<&'static str, u64> {
    let mut s = BTreeMap::new();
    let backend_seed = |b: &EvalBackend| match b {
        EvalBackend::MonteCarlo { base_seed, .. } => Some(*base_seed),
        EvalBackend::Exact => None,
    };
    match command {
        Command::Oc => {
            if let Some(seed) = backend_seed(&cfg.backend) {
                s.insert("mc_base_seed", seed);
            }
        }
        Command::Optimize => {
            s.insert("optimizer", cfg.optimizer.seed);
            if let Some(seed) = backend_seed(&cfg.backend) {
                s.insert("mc_base_seed", seed);
            }
        }
        Command::Benchmark => {
            s.insert("first_run", cfg.benchmark.first_seed);
            if let Some(seed) = backend_seed(&cfg.benchmark.backend) {
                s.insert("mc_base_seed", seed);
            }
        }
        Command::Study => {
            s.insert("optimizer", cfg.study.optimizer.seed);
            s.insert("mc_base_seed", cfg.study.mc_seed);
        }
        Command::Boundary | Command::ToerCurve => {}
    }
    s
}

fn write_envelope<T: Serialize>(path: &Path, command: Command, cfg: &RunConfig, result: T) -> Result<()> {
    let env = Envelope {
        command: command.name(),
        version: env!("CARGO_PKG_VERSION"),
        rng: RNG_ALGORITHM,
        seeds: seeds(command, cfg),
        workers: rayon::current_num_threads(),
        config: cfg,
        result,
    };
    let text = serde_json::to_string_pretty(&env).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn run(command: Command, cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&cfg.out_dir)?;
    match command {
        Command::Oc => oc(cfg),
        Command::Optimize => optimize_cmd(cfg),
        Command::Benchmark => benchmark(cfg),
        Command::Study => study(cfg),
        Command::Boundary => boundary(cfg),
        Command::ToerCurve => toer(cfg),
    }
}

#[derive(Serialize)]
struct ScenarioOc<'a> {
    scenario: &'a str,
    rates: &'a [f64],
    oc: &'a OCResult,
}

/// `scenario,stratum,reject_prob,fwer,ewp,ecd`: one row per stratum, then a
/// summary row with stratum `all`.
pub fn write_oc_csv<W: std::io::Write>(results: &[(Scenario, OCResult)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scenario", "stratum", "reject_prob", "fwer", "ewp", "ecd"])?;
    for (s, oc) in results {
        for (i, p) in oc.reject_prob.iter().enumerate() {
            w.write_record([s.label.clone(), (i + 1).to_string(), format_float(*p), String::new(), String::new(), String::new()])?;
        }
        w.write_record([
            s.label.clone(),
            "all".into(),
            String::new(),
            format_float(oc.fwer),
            format_float(oc.ewp),
            format_float(oc.ecd),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn engine_for(cfg: &RunConfig) -> Result<(basketopt_core::study::ScenarioSet, Arc<OcEngine>)> {
    let set = scenario_library(&cfg.set)?;
    let model = Arc::new(BasketModel::new(set.design.clone())?);
    let engine = Arc::new(OcEngine::new(model, cfg.backend)?);
    Ok((set, engine))
}

fn oc(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let (set, engine) = engine_for(cfg)?;
    let scenarios: Vec<Scenario> = match &cfg.scenario {
        Some(label) => vec![set
            .scenario(label)
            .cloned()
            .ok_or_else(|| Error::Config(format!("set {} has no scenario `{label}`", set.id)))?],
        None => set.scenarios.clone(),
    };
    let results = engine.evaluate_many(&cfg.phi.0, &scenarios)?;
    let pairs: Vec<(Scenario, OCResult)> = scenarios.into_iter().zip(results).collect();
    let csv_path = cfg.out_dir.join("oc.csv");
    write_oc_csv(&pairs, File::create(&csv_path)?)?;
    let json_path = cfg.out_dir.join("oc.json");
    let body: Vec<ScenarioOc> = pairs
        .iter()
        .map(|(s, oc)| ScenarioOc {
            scenario: &s.label,
            rates: &s.rates,
            oc,
        })
        .collect();
    write_envelope(&json_path, Command::Oc, cfg, body)?;
    Ok(vec![csv_path, json_path])
}

#[derive(Serialize)]
struct OptimizeBody<'a> {
    utility: String,
    algorithm: &'a str,
    phi_star: &'a [f64],
    u_star: f64,
    n_evals: usize,
    n_steps: usize,
    utility_calls: u64,
    oc_evaluations: u64,
    wall_time_s: f64,
    generation_best: &'a [f64],
    at_optimum: Option<UtilityEvaluation>,
}

fn optimize_cmd(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let (set, engine) = engine_for(cfg)?;
    let spec = set
        .utility(cfg.utility.kind, cfg.utility.averaging)?
        .with_params(cfg.params)?;
    let objective = UtilityObjective::new(spec, engine)?;
    let f = |x: &[f64]| objective.value(x);
    let r: OptimizerResult = optimize(&f, &cfg.optimizer)?;
    let utility_calls = objective.utility_calls();
    let oc_evaluations = objective.oc_evaluations();
    let at_optimum = match TuningParams::from_slice(&r.phi_star) {
        Ok(phi) => Some(objective.details(&phi)?),
        Err(_) => None,
    };
    let trace_path = cfg.out_dir.join("trace.csv");
    r.save_trace_csv(&trace_path)?;
    let json_path = cfg.out_dir.join("optimize.json");
    let body = OptimizeBody {
        utility: cfg.utility.name(),
        algorithm: &r.algorithm,
        phi_star: &r.phi_star,
        u_star: r.u_star,
        n_evals: r.n_evals,
        n_steps: r.n_steps,
        utility_calls,
        oc_evaluations,
        wall_time_s: r.wall_time_s,
        generation_best: &r.generation_best,
        at_optimum,
    };
    write_envelope(&json_path, Command::Optimize, cfg, body)?;
    Ok(vec![json_path, trace_path])
}

fn file_safe(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect()
}

fn benchmark(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let out = run_part1(&cfg.benchmark)?;
    let dir = &cfg.out_dir;
    let runs_path = dir.join("benchmark_runs.csv");
    out.report.write_runs_csv(File::create(&runs_path)?)?;
    let summary_path = dir.join("benchmark_summary.csv");
    out.report.write_summary_csv(File::create(&summary_path)?)?;
    let traces = dir.join("traces");
    fs::create_dir_all(&traces)?;
    for (record, trace) in out.report.runs.iter().zip(&out.traces) {
        if let Some(t) = trace {
            let name = format!("{}__{}__run{}.csv", record.problem, file_safe(&record.algorithm), record.run);
            t.save_trace_csv(&traces.join(name))?;
        }
    }
    let json_path = dir.join("benchmark.json");
    #[derive(Serialize)]
    struct Body<'a> {
        digest: String,
        report: &'a basketopt_core::study::BenchmarkReport,
    }
    write_envelope(
        &json_path,
        Command::Benchmark,
        cfg,
        Body {
            digest: out.report.digest(),
            report: &out.report,
        },
    )?;
    Ok(vec![runs_path, summary_path, json_path, traces])
}

fn study(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let tables = run_part2_3(&cfg.study)?;
    let rows_path = cfg.out_dir.join("study_rows.csv");
    tables.write_rows_csv(File::create(&rows_path)?)?;
    let optima_path = cfg.out_dir.join("study_optima.csv");
    tables.write_optima_csv(File::create(&optima_path)?)?;
    let json_path = cfg.out_dir.join("study.json");
    write_envelope(&json_path, Command::Study, cfg, &tables)?;
    Ok(vec![rows_path, optima_path, json_path])
}

fn boundary(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let rows = boundary_curve(&cfg.boundary.designs, &cfg.boundary.tau_grid)?;
    let csv_path = cfg.out_dir.join("boundary.csv");
    write_boundary_csv(&rows, File::create(&csv_path)?)?;
    let json_path = cfg.out_dir.join("boundary.json");
    write_envelope(&json_path, Command::Boundary, cfg, &rows)?;
    Ok(vec![csv_path, json_path])
}

fn toer(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let phis: Vec<TuningParams> = cfg.toer_curve.phis.iter().map(|p| p.0).collect();
    let rows = toer_curve(cfg.toer_curve.n, &phis, &cfg.toer_curve.p2_grid)?;
    let csv_path = cfg.out_dir.join("toer_curve.csv");
    write_toer_csv(&rows, File::create(&csv_path)?)?;
    let json_path = cfg.out_dir.join("toer_curve.json");
    write_envelope(&json_path, Command::ToerCurve, cfg, &rows)?;
    Ok(vec![csv_path, json_path])
}

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::UnknownScenarioSet(_) | Error::Domain(_) => 2,
        Error::ContinuedFraction { .. } | Error::Quadrature { .. } => 3,
        Error::OutcomeSpaceTooLarge { .. } => 4,
        Error::Io(_) => 1,
    }
}
