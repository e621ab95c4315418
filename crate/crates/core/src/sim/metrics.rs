use std::collections::BTreeMap;

use num_rational::Ratio;
use serde::Serialize;

use crate::consensus::{AcceptanceDecision, SkipReason};

/// One row of `metrics.csv`: an accepted block.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockMetrics {
    pub height: u64,
    pub round: u64,
    pub winner: String,
    pub strategy: String,
    /// Exact `correct/total`.
    pub claimed_accuracy: String,
    pub accuracy: f64,
    pub verified: bool,
    pub validations_performed: u64,
    pub submissions: u64,
    pub skipped_not_committed: u64,
    pub skipped_accuracy_mismatch: u64,
    pub epoch_budget: u32,
    pub epochs_elapsed: u64,
    pub header_hash: String,
    pub model_hash: String,
}

/// Wall-clock time spent simulating a round, kept apart from the
/// deterministic outputs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundTiming {
    pub round: u64,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OverfitRecord {
    pub round: u64,
    pub miner: String,
    pub committed: crate::dl::Accuracy,
    pub overfit: crate::dl::Accuracy,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundRecord {
    pub round: u64,
    pub height: u64,
    pub submissions: usize,
    pub accepted: bool,
    pub winner: Option<String>,
    pub winner_strategy: Option<String>,
    /// Set when the accepted block had no commitment in the node's log.
    pub uncommitted: bool,
    pub validations: usize,
    pub skipped: Vec<String>,
    pub node_disagreements: u64,
}

fn skip_name(r: &SkipReason) -> &'static str {
    match r {
        SkipReason::NotCommitted => "not_committed",
        SkipReason::StructureInvalid { .. } => "structure_invalid",
        SkipReason::OversizeModel { .. } => "oversize_model",
        SkipReason::AccuracyMismatch { .. } => "accuracy_mismatch",
    }
}

impl RoundRecord {
    pub fn new(round: u64, height: u64, submissions: usize, d: &AcceptanceDecision, node_disagreements: u64) -> Self {
        let b = d.accepted();
        RoundRecord {
            round,
            height,
            submissions,
            accepted: b.is_some(),
            winner: b.map(|b| b.header.miner_id.0.clone()),
            winner_strategy: None,
            uncommitted: false,
            validations: d.validations,
            skipped: d.skipped.iter().map(|s| skip_name(&s.reason).to_string()).collect(),
            node_disagreements,
        }
    }
}

/// `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub rounds: u64,
    pub accepted_blocks: u64,
    pub failed_rounds: u64,
    pub wins_by_strategy: BTreeMap<String, u64>,
    pub wins_by_miner: BTreeMap<String, u64>,
    pub thief_wins: u64,
    pub overfitter_wins: u64,
    pub inflator_wins: u64,
    pub uncommitted_acceptances: u64,
    pub skips_by_reason: BTreeMap<String, u64>,
    /// Exact `numerator/denominator`.
    pub recycling_ratio: Option<String>,
    pub recycling_ratio_f64: Option<f64>,
    pub final_accuracy: Option<String>,
    pub final_accuracy_f64: Option<f64>,
    pub stopped_by_requester: bool,
    pub node_disagreements: u64,
    pub validations: u64,
    pub overfits: Vec<OverfitRecord>,
}

impl Summary {
    pub fn build(
        rounds: &[RoundRecord],
        blocks: &[BlockMetrics],
        ratio: Option<Ratio<u128>>,
        stopped: bool,
        overfits: Vec<OverfitRecord>,
    ) -> Self {
        let mut wins_by_strategy = BTreeMap::new();
        let mut wins_by_miner = BTreeMap::new();
        for b in blocks {
            *wins_by_strategy.entry(b.strategy.clone()).or_insert(0) += 1;
            *wins_by_miner.entry(b.winner.clone()).or_insert(0) += 1;
        }
        let mut skips_by_reason = BTreeMap::new();
        for s in rounds.iter().flat_map(|r| &r.skipped) {
            *skips_by_reason.entry(s.clone()).or_insert(0) += 1;
        }
        let wins = |s: &str| wins_by_strategy.get(s).copied().unwrap_or(0);
        let last = blocks.last();
        Summary {
            rounds: rounds.len() as u64,
            accepted_blocks: blocks.len() as u64,
            failed_rounds: rounds.iter().filter(|r| !r.accepted).count() as u64,
            thief_wins: wins("thief"),
            overfitter_wins: wins("overfitter"),
            inflator_wins: wins("inflator"),
            wins_by_strategy: wins_by_strategy.clone(),
            wins_by_miner,
            uncommitted_acceptances: rounds.iter().filter(|r| r.uncommitted).count() as u64,
            skips_by_reason,
            recycling_ratio: ratio.map(|r| format!("{}/{}", r.numer(), r.denom())),
            recycling_ratio_f64: ratio.map(|r| *r.numer() as f64 / *r.denom() as f64),
            final_accuracy: last.map(|b| b.claimed_accuracy.clone()),
            final_accuracy_f64: last.map(|b| b.accuracy),
            stopped_by_requester: stopped,
            node_disagreements: rounds.iter().map(|r| r.node_disagreements).sum(),
            validations: rounds.iter().map(|r| r.validations as u64).sum(),
            overfits,
        }
    }
}
