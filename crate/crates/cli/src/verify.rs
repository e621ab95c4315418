//! `podl verify`: rebuild every model in a chain dump from the training set
//! and check it against the headers and the per-height test sets.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use podl_core::chain::{ChainDump, ChainError, Digest};
use podl_core::consensus::{verify_chain, ChainVerificationReport, ConsensusError};
use podl_core::dl::Dataset;

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error("corrupt chain dump: {0}")]
    DumpCorrupt(String),
    #[error("datasets: {0}")]
    Datasets(String),
    #[error("no dataset with id {id} for height {height}")]
    Unavailable { height: u64, id: Digest },
    #[error("training set {0} not found")]
    NoTrainSet(Digest),
}

/// Loads every `*.csv`/`*.json` dataset pair in `dir`, keyed by content id.
pub fn load_datasets(dir: &Path) -> Result<HashMap<Digest, Dataset>, VerifyError> {
    let entries = std::fs::read_dir(dir).map_err(|e| VerifyError::Datasets(format!("{}: {e}", dir.display())))?;
    let mut out = HashMap::new();
    let mut paths: Vec<_> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    for p in paths.iter().filter(|p| p.extension().is_some_and(|x| x == "json")) {
        let ds = Dataset::load(p).map_err(|e| VerifyError::Datasets(e.to_string()))?;
        out.insert(ds.id(), ds);
    }
    Ok(out)
}

pub fn verify(dump_path: &Path, datasets_dir: &Path) -> Result<ChainVerificationReport, VerifyError> {
    let corrupt = |e: ChainError| VerifyError::DumpCorrupt(e.to_string());
    let dump = ChainDump::read(dump_path).map_err(corrupt)?;
    let train_id = dump.train_set_id;
    let (store, test_ids) = dump.into_store().map_err(corrupt)?;
    let datasets = load_datasets(datasets_dir)?;
    let train = datasets.get(&train_id).ok_or(VerifyError::NoTrainSet(train_id))?;
    let mut tests: BTreeMap<u64, &Dataset> = BTreeMap::new();
    for (h, id) in test_ids.iter().enumerate() {
        let h = h as u64;
        match datasets.get(id) {
            Some(d) => {
                tests.insert(h, d);
            }
            None if store.is_pruned(h) => {}
            None => return Err(VerifyError::Unavailable { height: h, id: *id }),
        }
    }
    verify_chain(&store, train, &tests).map_err(|e| match e {
        ConsensusError::DatasetUnavailable { height } => {
            VerifyError::Unavailable { height, id: test_ids.get(height as usize).copied().unwrap_or(Digest::ZERO) }
        }
        other => VerifyError::DumpCorrupt(other.to_string()),
    })
}

/// One line per height, then the verdict.
pub fn render(report: &ChainVerificationReport) -> String {
    let mut s = String::new();
    for h in &report.heights {
        let status = if h.ok() { "ok" } else { "FAILED" };
        s.push_str(&format!(
            "height {}: {status} (pruned={}, retrain_hash_match={}, accuracy_match={}, structure_ok={})\n",
            h.height, h.pruned, h.retrain_hash_match, h.accuracy_match, h.structure_ok
        ));
    }
    if report.overall {
        s.push_str(&format!("verified {} blocks\n", report.heights.len()));
    } else {
        let failed: Vec<String> = report.failed_heights().iter().map(u64::to_string).collect();
        s.push_str(&format!("verification failed at heights: {}\n", failed.join(",")));
    }
    s
}
