//! Pipeline front-end: config resolution, staged runs with checksum caching,
//! and report rendering.

pub mod config;
pub mod pipeline;
pub mod report;

pub use config::{CheckName, CorpusSource, ModelKind, Overrides, RunConfig};
pub use pipeline::{Manifest, Pipeline, Report, RunOutcome, Stage, StageError};

use std::path::Path;

/// Loads, overrides and resolves a config, then runs the pipeline through `until`.
pub fn run_config_file(path: &Path, overrides: Overrides, until: Stage) -> Result<RunOutcome, StageError> {
    let schema = |e: anyhow::Error| StageError { stage: Stage::Schema, source: e };
    let mut cfg = RunConfig::load(path).map_err(schema)?;
    cfg.apply(overrides);
    let cfg = cfg.resolve(Some(path)).map_err(schema)?;
    Pipeline::new(cfg).run(until)
}

/// Runs an already-built config.
pub fn run(cfg: RunConfig, until: Stage) -> Result<RunOutcome, StageError> {
    let cfg = cfg
        .resolve(None)
        .map_err(|e| StageError { stage: Stage::Schema, source: e })?;
    Pipeline::new(cfg).run(until)
}
