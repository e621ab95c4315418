use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{verify_chain, ConsensusError};
use crate::chain::ChainStore;
use crate::dl::{Accuracy, Dataset};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainChoice {
    KeepCurrent,
    Replace,
}

/// How much a challenger must beat the current chain by.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForkRule {
    /// Strictly longer, fully verifiable, and strictly more accurate at
    /// every height both chains have past the fork point.
    #[default]
    StrictDominance,
    /// Strictly longer and fully verifiable.
    LongerOnly,
}

/// [`compare_chains_with`] under [`ForkRule::StrictDominance`].
pub fn compare_chains(
    current: &ChainStore,
    challenger: &ChainStore,
    train_set: &Dataset,
    test_sets: &BTreeMap<u64, &Dataset>,
) -> Result<ChainChoice, ConsensusError> {
    compare_chains_with(current, challenger, train_set, test_sets, ForkRule::StrictDominance)
}

/// Decides whether `challenger` replaces `current`. Both must start from the
/// same height-0 block. `test_sets` are the per-height sets for verifying the
/// challenger.
pub fn compare_chains_with(
    current: &ChainStore,
    challenger: &ChainStore,
    train_set: &Dataset,
    test_sets: &BTreeMap<u64, &Dataset>,
    rule: ForkRule,
) -> Result<ChainChoice, ConsensusError> {
    if let (Some(a), Some(b)) = (current.header(0), challenger.header(0)) {
        if a.hash() != b.hash() {
            return Err(ConsensusError::ForeignChain);
        }
    }
    if challenger.len() <= current.len() {
        return Ok(ChainChoice::KeepCurrent);
    }
    let fork = (0..current.len() as u64)
        .find(|&h| current.header(h).map(|x| x.hash()) != challenger.header(h).map(|x| x.hash()))
        .unwrap_or(current.len() as u64);
    if rule == ForkRule::StrictDominance {
        for h in fork..current.len() as u64 {
            let ours = current.get(h).and_then(|b| b.claimed_accuracy());
            let theirs = challenger.get(h).and_then(|b| b.claimed_accuracy());
            match (ours, theirs) {
                (Some(o), Some(t)) if t > o => {}
                (None, Some(_)) => {}
                _ => return Ok(ChainChoice::KeepCurrent),
            }
        }
    }
    if !verify_chain(challenger, train_set, test_sets)?.overall {
        return Ok(ChainChoice::KeepCurrent);
    }
    Ok(ChainChoice::Replace)
}

/// Suffix maximum of claimed accuracy: entry `t` is the best accuracy at any
/// height `>= t`, a proxy for how hard block `t` is to reverse.
pub fn reversibility_index(store: &ChainStore) -> Vec<Option<Accuracy>> {
    let mut out = vec![None; store.len()];
    let mut best: Option<Accuracy> = None;
    for (i, b) in store.blocks().iter().enumerate().rev() {
        if let Some(a) = b.claimed_accuracy() {
            best = Some(best.map_or(a, |x| x.max(a)));
        }
        out[i] = best;
    }
    out
}
