use std::collections::BTreeMap;

use super::ActorError;
use crate::chain::{Block, BlockHeader, ChainStore};
use crate::consensus::{
    accept_block, compare_chains_with, finalize_height, AcceptanceDecision, ChainChoice, CommitmentLog, ConsensusError,
    ForkRule, RoundConfig, Submission,
};
use crate::dl::Dataset;

/// A validating node: its own chain, commitment log and Phase-2 inbox.
#[derive(Clone, Debug)]
pub struct FullNodeActor {
    pub node_id: String,
    pub store: ChainStore,
    pub log: CommitmentLog,
    pub honest: bool,
    pub config: RoundConfig,
    inbox: Vec<Submission>,
}

impl FullNodeActor {
    pub fn new(node_id: impl Into<String>, config: RoundConfig, honest: bool) -> Self {
        FullNodeActor {
            node_id: node_id.into(),
            store: ChainStore::new(),
            log: CommitmentLog::new(config.commit_cap),
            honest,
            config,
            inbox: Vec::new(),
        }
    }

    pub fn open_phase1(&mut self, height: u64, start: u64, end: u64) {
        self.log.open_window(height, start, end);
    }

    pub fn on_commit(&mut self, header: BlockHeader, now: u64) -> Result<bool, ConsensusError> {
        self.log.commit_header(header.height, header, now)
    }

    pub fn on_submission(&mut self, sub: Submission) {
        self.inbox.push(sub);
    }

    pub fn inbox_len(&self) -> usize {
        self.inbox.len()
    }

    /// Ends Phase 2 for the next height: decides on everything received and
    /// appends the winner.
    pub fn close_phase2(&mut self, test_set: &Dataset) -> Result<AcceptanceDecision, ActorError> {
        let subs = std::mem::take(&mut self.inbox);
        let height = self.store.next_height();
        let prev = self.store.tip().map(|b| b.header.clone());
        let decision = accept_block(&self.log, height, &subs, test_set, prev.as_ref(), self.config.max_model_bytes);
        finalize_height(&mut self.store, &decision)?;
        Ok(decision)
    }

    /// A lone block offered outside the round schedule. Heights this node
    /// already holds are final.
    pub fn offer_block(&mut self, block: Block) -> Result<(), ConsensusError> {
        let height = block.height();
        if height < self.store.next_height() {
            return Err(ConsensusError::Finalized { height });
        }
        self.store.append(block)?;
        Ok(())
    }

    /// Whole-chain replacement through the fork-choice rule.
    pub fn consider_chain(
        &mut self,
        challenger: &ChainStore,
        train_set: &Dataset,
        test_sets: &BTreeMap<u64, &Dataset>,
        rule: ForkRule,
    ) -> Result<ChainChoice, ConsensusError> {
        let choice = compare_chains_with(&self.store, challenger, train_set, test_sets, rule)?;
        if choice == ChainChoice::Replace {
            self.store = challenger.clone();
        }
        Ok(choice)
    }
}
