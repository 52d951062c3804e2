//! End-to-end pipelines behind the command-line tool: configuration, the
//! results directory layout, the grouping experiment, graph export and
//! standalone scoring.

mod config;
mod run;
mod tools;

pub use config::{DataSource, ExperimentConfig, Grids, Method, ScopeChoice};
pub use run::{
    generate_to_dir, load_cohort, run_experiment, write_deltas_csv, write_results_csv, Manifest, RunOutcome,
    StageRecord, LSGP_SCOPE,
};
pub use tools::{run_graph, run_groups, score_files, GroupsOptions};

/// Environment variable holding the worker thread count (default 1).
pub const THREADS_ENV: &str = "LSGP_THREADS";

/// Thread count from [`THREADS_ENV`], defaulting to 1.
pub fn threads_from_env() -> crate::Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| crate::Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        Err(_) => Ok(1),
    }
}
