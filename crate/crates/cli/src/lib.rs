//! Experiment runner for heatlab: JSON configs in, deterministic CSV and
//! JSON artifacts out, plus the acceptance battery.

pub mod acceptance;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

use std::path::Path;
use std::time::Instant;

pub use config::{ExperimentConfig, ExperimentSpec};
pub use error::CliError;

/// Runs `cfg` and writes its artifacts under `root`. Failed checks are
/// recorded in the outcome, not returned as errors.
pub fn run_to_dir(cfg: &ExperimentConfig, root: &Path) -> Result<output::Outcome, CliError> {
    let start = Instant::now();
    let outcome = experiments::run_experiment(cfg)?;
    let dir = root.join(cfg.output_dir());
    output::write_outcome(&dir, cfg.spec.id(), cfg, &outcome, start.elapsed().as_secs_f64())?;
    Ok(outcome)
}
