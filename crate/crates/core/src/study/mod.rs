//! Study harness: scenario catalog, optimizer benchmark, utility comparison
//! and exploratory curves.

mod catalog;
mod curves;
mod part1;
mod part23;
mod stats;

pub use catalog::{scenario_library, ScenarioSet, SET_IDS};
pub use curves::{
    boundary_curve, cap_crossing, default_boundary_designs, default_p2_grid, default_tau_grid, default_toer_phis,
    parse_list, toer_curve, write_boundary_csv, write_toer_csv, BoundaryRow, ToerRow, FIXED_NULL_RATE,
};
pub use part1::{
    default_algorithms, run_part1, select, AlgorithmSummary, BenchmarkReport, Part1Config, Part1Output, Problem,
    RunRecord, Verdict,
};
pub use part23::{
    all_utilities, run_part2_3, ComparisonRow, ComparisonTables, OptimumRecord, Part23Config, REFERENCE_PHIS,
};
pub use stats::{se_of_sd, SdStats, Summary, Z_95};
