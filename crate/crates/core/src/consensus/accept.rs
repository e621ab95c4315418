use std::cmp::Ordering;

use serde::Serialize;

use super::{CommitmentLog, ConsensusError};
use crate::chain::{structure_issues, Block, BlockHeader, ChainStore, Digest, MinerId, StructureIssue};
use crate::dl::{evaluate, Accuracy, Dataset};

/// A Phase-2 reveal: the full block with model and lineage.
#[derive(Clone, Debug, PartialEq)]
pub struct Submission {
    pub block: Block,
    pub arrival_time: u64,
    pub submitter: MinerId,
}

impl Submission {
    pub fn claim(&self) -> Option<Accuracy> {
        self.block.claimed_accuracy()
    }
}

/// Claimed accuracy descending (no claim sorts last), then arrival time
/// ascending, then header hash ascending.
pub fn order_submissions(subs: &[Submission]) -> Vec<&Submission> {
    let mut keyed: Vec<(&Submission, Digest)> = subs.iter().map(|s| (s, s.block.hash())).collect();
    keyed.sort_by(|(a, ha), (b, hb)| {
        let by_claim = match (a.claim(), b.claim()) {
            (Some(x), Some(y)) => y.cmp(&x),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        };
        by_claim.then(a.arrival_time.cmp(&b.arrival_time)).then(ha.cmp(hb))
    });
    keyed.into_iter().map(|(s, _)| s).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum SkipReason {
    NotCommitted,
    StructureInvalid { issues: Vec<StructureIssue> },
    OversizeModel { bytes: usize, limit: usize },
    AccuracyMismatch { claimed: Option<Accuracy>, measured: Accuracy },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Skipped {
    pub header_hash: Digest,
    pub submitter: MinerId,
    #[serde(flatten)]
    pub reason: SkipReason,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    Accepted {
        header_hash: Digest,
        height: u64,
        winner: MinerId,
        accuracy: Accuracy,
        validations_performed: usize,
        #[serde(skip)]
        block: Box<Block>,
    },
    RoundFailed {
        reason: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AcceptanceDecision {
    #[serde(flatten)]
    pub outcome: Outcome,
    pub skipped: Vec<Skipped>,
    /// Model evaluations run, whether or not a block was accepted.
    pub validations: usize,
}

impl AcceptanceDecision {
    pub fn accepted(&self) -> Option<&Block> {
        match &self.outcome {
            Outcome::Accepted { block, .. } => Some(block),
            Outcome::RoundFailed { .. } => None,
        }
    }
}

/// Walks the submissions in [`order_submissions`] order and accepts the
/// first one that was committed at `height`, is structurally sound on top of
/// `prev`, fits the size limit and whose model scores exactly its claim on
/// `test_set`.
pub fn accept_block(
    log: &CommitmentLog,
    height: u64,
    subs: &[Submission],
    test_set: &Dataset,
    prev: Option<&BlockHeader>,
    max_model_bytes: usize,
) -> AcceptanceDecision {
    let mut skipped = Vec::new();
    let mut validations = 0;
    for sub in order_submissions(subs) {
        let block = &sub.block;
        let header_hash = block.hash();
        let skip = |reason| Skipped { header_hash, submitter: sub.submitter.clone(), reason };
        if block.height() != height || !log.is_committed(height, &header_hash) {
            skipped.push(skip(SkipReason::NotCommitted));
            continue;
        }
        let mut issues = structure_issues(block, prev);
        let claim = block.claimed_accuracy();
        if claim.is_none() {
            issues.push(StructureIssue::InvalidClaim);
        }
        let Some(blob) = block.model.as_ref() else {
            issues.push(StructureIssue::ModelHashMismatch);
            skipped.push(skip(SkipReason::StructureInvalid { issues }));
            continue;
        };
        if !issues.is_empty() {
            skipped.push(skip(SkipReason::StructureInvalid { issues }));
            continue;
        }
        if blob.len() > max_model_bytes {
            skipped.push(skip(SkipReason::OversizeModel { bytes: blob.len(), limit: max_model_bytes }));
            continue;
        }
        let measured = match blob.decode().and_then(|m| evaluate(&m, test_set)) {
            Ok(a) => a,
            Err(_) => {
                skipped.push(skip(SkipReason::StructureInvalid { issues: vec![StructureIssue::ModelHashMismatch] }));
                continue;
            }
        };
        validations += 1;
        if Some(measured) == claim {
            return AcceptanceDecision {
                outcome: Outcome::Accepted {
                    header_hash,
                    height,
                    winner: block.header.miner_id.clone(),
                    accuracy: measured,
                    validations_performed: validations,
                    block: Box::new(block.clone()),
                },
                skipped,
                validations,
            };
        }
        skipped.push(skip(SkipReason::AccuracyMismatch { claimed: claim, measured }));
    }
    let reason = if subs.is_empty() { "no submissions".to_string() } else { "no valid submission".to_string() };
    AcceptanceDecision { outcome: Outcome::RoundFailed { reason }, skipped, validations }
}

/// Appends an accepted block. Heights already in the store are final, so a
/// block for one of them is refused. A failed round leaves the store alone.
pub fn finalize_height(store: &mut ChainStore, decision: &AcceptanceDecision) -> Result<Option<u64>, ConsensusError> {
    let Some(block) = decision.accepted() else {
        return Ok(None);
    };
    let height = block.height();
    if height < store.next_height() {
        return Err(ConsensusError::Finalized { height });
    }
    store.append(block.clone())?;
    Ok(Some(height))
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::*;

    #[test]
    fn ordering_rules() {
        let (_, m0) = models();
        let a = submission(&m0, "a", acc(95, 100), 5);
        let b = submission(&m0, "b", acc(90, 100), 2);
        let subs = [b.clone(), a.clone()];
        assert_eq!(order_submissions(&subs)[0].submitter, a.submitter);

        let c = submission(&m0, "c", acc(9, 10), 5);
        let d = submission(&m0, "d", acc(90, 100), 2);
        assert_eq!(order_submissions(&[c.clone(), d.clone()])[0].submitter, d.submitter);

        let e = submission(&m0, "e", acc(9, 10), 2);
        let f = submission(&m0, "f", acc(9, 10), 2);
        let first = order_submissions(&[e.clone(), f.clone()])[0].block.hash();
        assert_eq!(first, e.block.hash().min(f.block.hash()));
    }

    #[test]
    fn inflated_claim_skipped_then_honest_accepted() {
        let (test, m_zero) = models();
        let mut log = CommitmentLog::new(1);
        log.open_window(0, 0, 100);
        // The zero model scores 7/10 on the fixture set.
        let liar = submission(&m_zero, "liar", acc(95, 100), 1);
        let honest = submission(&m_zero, "honest", acc(7, 10), 2);
        for s in [&liar, &honest] {
            log.commit_header(0, s.block.header.clone(), 0).unwrap();
        }
        let d = accept_block(&log, 0, &[liar, honest], &test, None, 1 << 20);
        match &d.outcome {
            Outcome::Accepted { winner, validations_performed, .. } => {
                assert_eq!(winner.0, "honest");
                assert_eq!(*validations_performed, 2);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(d.skipped[0].reason, SkipReason::AccuracyMismatch { .. }));
    }

    #[test]
    fn uncommitted_and_empty() {
        let (test, m) = models();
        let mut log = CommitmentLog::new(1);
        log.open_window(0, 0, 100);
        let d = accept_block(&log, 0, &[submission(&m, "thief", acc(7, 10), 1)], &test, None, 1 << 20);
        assert!(matches!(d.outcome, Outcome::RoundFailed { .. }));
        assert_eq!(d.skipped[0].reason, SkipReason::NotCommitted);
        assert_eq!(d.validations, 0);
        let d = accept_block(&log, 0, &[], &test, None, 1 << 20);
        assert!(matches!(d.outcome, Outcome::RoundFailed { .. }));
    }

    #[test]
    fn oversize_skipped() {
        let (test, m) = models();
        let mut log = CommitmentLog::new(1);
        log.open_window(0, 0, 100);
        let s = submission(&m, "big", acc(7, 10), 1);
        log.commit_header(0, s.block.header.clone(), 0).unwrap();
        let d = accept_block(&log, 0, &[s], &test, None, 8);
        assert!(matches!(d.skipped[0].reason, SkipReason::OversizeModel { limit: 8, .. }));
    }

    #[test]
    fn finality() {
        let (test, m) = models();
        let mut log = CommitmentLog::new(1);
        log.open_window(0, 0, 100);
        let s = submission(&m, "a", acc(7, 10), 1);
        log.commit_header(0, s.block.header.clone(), 0).unwrap();
        let d = accept_block(&log, 0, &[s], &test, None, 1 << 20);
        let mut store = ChainStore::new();
        assert_eq!(finalize_height(&mut store, &d).unwrap(), Some(0));
        assert_eq!(finalize_height(&mut store, &d), Err(ConsensusError::Finalized { height: 0 }));

        let s1 = submission_at(&m, "a", acc(7, 10), 1, 1, store.tip_hash());
        log.open_window(1, 0, 100);
        log.commit_header(1, s1.block.header.clone(), 0).unwrap();
        let d1 = accept_block(&log, 1, &[s1], &test, store.header(0), 1 << 20);
        assert_eq!(finalize_height(&mut store, &d1).unwrap(), Some(1));

        let failed = accept_block(&log, 2, &[], &test, store.header(1), 1 << 20);
        assert_eq!(finalize_height(&mut store, &failed).unwrap(), None);
        assert_eq!(store.len(), 2);
    }

    #[test]
    fn decision_is_json() {
        let (test, m) = models();
        let d = accept_block(&CommitmentLog::new(1), 0, &[submission(&m, "x", acc(1, 2), 0)], &test, None, 100);
        let v = serde_json::to_value(&d).unwrap();
        assert_eq!(v["outcome"], "round_failed");
        assert_eq!(v["skipped"][0]["reason"], "not_committed");
    }
}
