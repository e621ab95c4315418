//! `podl run`: simulate a scenario and write its artifacts.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use podl_core::netsim::write_trace;
use podl_core::sim::{run_scenario_partial, BlockMetrics, ScenarioConfig, SimError, SimOutcome};

pub const CHAIN_FILE: &str = "chain.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const TRACE_FILE: &str = "trace.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const ROUNDS_FILE: &str = "rounds.json";
pub const CONFIG_FILE: &str = "config.json";
pub const DATASETS_DIR: &str = "datasets";

/// Column order of `metrics.csv`; matches the field order of [`BlockMetrics`].
pub const METRICS_COLUMNS: [&str; 15] = [
    "height",
    "round",
    "winner",
    "strategy",
    "claimed_accuracy",
    "accuracy",
    "verified",
    "validations_performed",
    "submissions",
    "skipped_not_committed",
    "skipped_accuracy_mismatch",
    "epoch_budget",
    "epochs_elapsed",
    "header_hash",
    "model_hash",
];

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("scenario setup failed: {0}")]
    Setup(SimError),
    #[error("run aborted after {rounds} rounds: {error}")]
    Aborted { rounds: usize, error: SimError },
    #[error("invariant violated: {0}")]
    Invariant(String),
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> RunError {
    RunError::Io { path: path.to_path_buf(), message: e.to_string() }
}

pub fn write_metrics(path: &Path, rows: &[BlockMetrics]) -> Result<(), RunError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(METRICS_COLUMNS).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let bytes = serde_json::to_vec_pretty(value).map_err(|e| io_err(path, e))?;
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))
}

/// Writes every artifact of a (possibly partial) run into `dir`.
pub fn write_artifacts(dir: &Path, cfg: &ScenarioConfig, out: &SimOutcome) -> Result<(), RunError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    write_json(&dir.join(CONFIG_FILE), cfg)?;
    let datasets = dir.join(DATASETS_DIR);
    out.train_set().save(&datasets, "train").map_err(|e| io_err(&datasets, e))?;
    for (k, t) in out.requester.schedule().iter().enumerate() {
        t.save(&datasets, &format!("test-{k}")).map_err(|e| io_err(&datasets, e))?;
    }
    let chain = dir.join(CHAIN_FILE);
    out.dump().map_err(|e| io_err(&chain, e))?.write(&chain).map_err(|e| io_err(&chain, e))?;
    write_metrics(&dir.join(METRICS_FILE), &out.blocks)?;

    let timing = dir.join(TIMING_FILE);
    let mut w = csv::Writer::from_path(&timing).map_err(|e| io_err(&timing, e))?;
    for t in &out.timings {
        w.serialize(t).map_err(|e| io_err(&timing, e))?;
    }
    w.flush().map_err(|e| io_err(&timing, e))?;

    let trace = dir.join(TRACE_FILE);
    let f = File::create(&trace).map_err(|e| io_err(&trace, e))?;
    write_trace(BufWriter::new(f), &out.trace).map_err(|e| io_err(&trace, e))?;
    write_json(&dir.join(ROUNDS_FILE), &out.rounds)?;
    write_json(&dir.join(SUMMARY_FILE), &out.summary)
}

/// Runs the scenario and writes artifacts even when the run stops early.
pub fn run(cfg: &ScenarioConfig, dir: &Path) -> Result<SimOutcome, RunError> {
    let partial = run_scenario_partial(cfg).map_err(RunError::Setup)?;
    write_artifacts(dir, cfg, &partial.outcome)?;
    if let Some(error) = partial.error {
        return Err(RunError::Aborted { rounds: partial.outcome.rounds.len(), error });
    }
    let s = &partial.outcome.summary;
    if s.uncommitted_acceptances > 0 {
        return Err(RunError::Invariant(format!("{} blocks accepted without a commitment", s.uncommitted_acceptances)));
    }
    if s.node_disagreements > 0 {
        return Err(RunError::Invariant(format!("honest full nodes disagreed {} times", s.node_disagreements)));
    }
    Ok(partial.outcome)
}
