//! The protocol rules: Phase-1 commitment log, Phase-2 acceptance in
//! descending claimed accuracy, per-height finality, full-chain verification
//! by retraining, and chain replacement.

mod accept;
mod commit;
mod fork;
mod verify;

use serde::{Deserialize, Serialize};

use crate::chain::{ChainError, MinerId};
use crate::dl::DlError;

pub use accept::{accept_block, finalize_height, order_submissions, AcceptanceDecision, Outcome, SkipReason, Skipped, Submission};
pub use commit::{Commitment, CommitmentLog};
pub use fork::{compare_chains, compare_chains_with, reversibility_index, ChainChoice, ForkRule};
pub use verify::{verify_chain, ChainVerificationReport, HeightReport};

pub const DEFAULT_MAX_MODEL_BYTES: usize = 10_000_000;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum ConsensusError {
    #[error("phase 1 for height {height} is closed at {now} ms")]
    PhaseClosed { height: u64, now: u64 },
    #[error("header is for height {found}, commitment window is for {expected}")]
    WrongHeight { expected: u64, found: u64 },
    #[error("miner {miner} already holds {cap} commitment(s) at height {height}")]
    CommitmentCap { miner: MinerId, height: u64, cap: usize },
    #[error("height {height} is final")]
    Finalized { height: u64 },
    #[error("no test set available for height {height}")]
    DatasetUnavailable { height: u64 },
    #[error("chains do not share a first block")]
    ForeignChain,
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Model(#[from] DlError),
    #[error("bad round config: {0}")]
    BadConfig(String),
}

/// Where the binding accuracy claim lives.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClaimMode {
    /// Header carries the placeholder; the claim is revealed with the model.
    #[default]
    RevealTime,
    /// Header carries the claim, so it must be fixed at commitment time.
    InHeader,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoundConfig {
    pub phase1_ms: u64,
    pub phase2_ms: u64,
    pub max_model_bytes: usize,
    pub pipeline_phases: bool,
    pub claim_mode: ClaimMode,
    /// Commitments accepted per miner id per height.
    pub commit_cap: usize,
}

impl Default for RoundConfig {
    fn default() -> Self {
        RoundConfig {
            phase1_ms: 600_000,
            phase2_ms: 150_000,
            max_model_bytes: DEFAULT_MAX_MODEL_BYTES,
            pipeline_phases: true,
            claim_mode: ClaimMode::RevealTime,
            commit_cap: 1,
        }
    }
}

impl RoundConfig {
    pub fn validate(&self) -> Result<(), ConsensusError> {
        if self.phase1_ms == 0 || self.phase2_ms == 0 {
            return Err(ConsensusError::BadConfig("phase durations must be positive".into()));
        }
        if self.commit_cap == 0 {
            return Err(ConsensusError::BadConfig("commit_cap must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use std::collections::BTreeMap;

    use super::Submission;
    use crate::chain::{make_block, BlockTemplate, ChainStore, Digest, MinerId, Transaction};
    use crate::dl::{
        evaluate, generate_task, init_weights, Accuracy, Dataset, Model, Record, TrainingLineage, TrainingParams,
        TrainingSegment,
    };

    pub fn acc(c: u64, t: u64) -> Accuracy {
        Accuracy::new(c, t).unwrap()
    }

    /// Ten records, seven of class 0; the all-zero model scores 7/10.
    pub fn models() -> (Dataset, Model) {
        let records = (0..10).map(|i| Record { features: vec![i as f64, 1.0], label: u32::from(i >= 7) }).collect();
        (Dataset::new(records, 2, 2).unwrap(), Model::zeros(&[2, 2]).unwrap())
    }

    pub fn submission(model: &Model, miner: &str, claim: Accuracy, arrival: u64) -> Submission {
        submission_at(model, miner, claim, arrival, 0, Digest::ZERO)
    }

    pub fn submission_at(model: &Model, miner: &str, claim: Accuracy, arrival: u64, height: u64, prev: Digest) -> Submission {
        let mut block = make_block(BlockTemplate {
            height,
            prev_header_hash: prev,
            transactions: vec![Transaction::coinbase(50, miner.as_bytes()), Transaction::transfer(b"t".to_vec())],
            model,
            training: None,
            claimed_accuracy: None,
            miner_id: MinerId::new(miner),
            now: arrival,
        })
        .unwrap();
        block.revealed_accuracy = Some(claim);
        Submission { block, arrival_time: arrival, submitter: MinerId::new(miner) }
    }

    pub fn test_map(tests: &[Dataset]) -> BTreeMap<u64, &Dataset> {
        tests.iter().enumerate().map(|(i, t)| (i as u64, t)).collect()
    }

    pub fn honest_chain(n: usize) -> (ChainStore, Dataset, Vec<Dataset>) {
        honest_chain_with(n, 7, 0.02)
    }

    pub fn honest_chain_with(n: usize, init_seed: u64, lr: f64) -> (ChainStore, Dataset, Vec<Dataset>) {
        let (train, tests) = generate_task(1, 60, 30, 8).unwrap();
        let mut store = ChainStore::new();
        extend_chain(&mut store, &train, &tests, n, init_seed, lr);
        (store, train, tests)
    }

    /// Appends `count` blocks, each training three more epochs from the tip.
    pub fn extend_chain(store: &mut ChainStore, train: &Dataset, tests: &[Dataset], count: usize, init_seed: u64, lr: f64) {
        let sizes = vec![2, 5, 3];
        for _ in 0..count {
            let h = store.next_height();
            let (start, parent) = match store.tip() {
                Some(b) => (b.model.as_ref().unwrap().decode().unwrap(), b.training.clone().unwrap()),
                None => (
                    init_weights(&TrainingParams::new(sizes.clone(), lr, 0, init_seed)).unwrap(),
                    TrainingLineage::fresh(sizes.clone(), init_seed, 54),
                ),
            };
            let lineage = parent.extended(TrainingSegment { learning_rate: lr, epochs: 3 }, Some(start.hash().unwrap()));
            let model = lineage.replay_last_from(&start, train).unwrap();
            let claim = evaluate(&model, &tests[h as usize]).unwrap();
            let mut block = make_block(BlockTemplate {
                height: h,
                prev_header_hash: store.tip_hash(),
                transactions: vec![Transaction::coinbase(50, b"m".to_vec())],
                model: &model,
                training: Some(lineage),
                claimed_accuracy: None,
                miner_id: MinerId::new(format!("m{init_seed}")),
                now: h,
            })
            .unwrap();
            block.revealed_accuracy = Some(claim);
            store.append(block).unwrap();
        }
    }
}
