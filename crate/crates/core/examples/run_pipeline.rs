//! The full `lsgp run` pipeline from code: every method over three cuts,
//! with a shortened SV-LSGP schedule, written to a results directory.
//!
//! cargo run --release --example run_pipeline -- [output-dir]

use std::path::PathBuf;

use lsgp::experiment::{run_experiment, ExperimentConfig};

fn main() -> lsgp::Result<()> {
    env_logger::init();
    let mut config = ExperimentConfig {
        n_cuts: 3,
        n_restarts: 2,
        output_dir: std::env::args()
            .nth(1)
            .map_or_else(|| std::env::temp_dir().join("lsgp-results"), PathBuf::from),
        ..ExperimentConfig::default()
    };
    config.lsgp.n_steps = 1000;

    let outcome = run_experiment(&config, 1)?;
    print!("{}", std::fs::read_to_string(config.output_dir.join("results.csv"))?);
    println!(
        "{} stages, {} failed; artifacts in {}",
        outcome.manifest.stages.len(),
        outcome.manifest.failed(),
        config.output_dir.display()
    );
    Ok(())
}
