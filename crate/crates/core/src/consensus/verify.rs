use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::ConsensusError;
use crate::chain::{structure_issues, Block, ChainStore, Digest};
use crate::dl::{evaluate, Dataset, Model, TrainingLineage, TrainingSegment};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeightReport {
    pub height: u64,
    /// Pruned heights get structure checks only; the other two flags are
    /// reported as passing.
    pub pruned: bool,
    pub retrain_hash_match: bool,
    pub accuracy_match: bool,
    pub structure_ok: bool,
}

impl HeightReport {
    pub fn ok(&self) -> bool {
        self.retrain_hash_match && self.accuracy_match && self.structure_ok
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainVerificationReport {
    pub heights: Vec<HeightReport>,
    pub overall: bool,
}

impl ChainVerificationReport {
    pub fn failed_heights(&self) -> Vec<u64> {
        self.heights.iter().filter(|h| !h.ok()).map(|h| h.height).collect()
    }
}

/// A model already reproduced from the training set, with the lineage that
/// produced it.
struct Verified {
    model: Model,
    lineage: TrainingLineage,
}

fn same_prefix(parent: &TrainingLineage, known: &TrainingLineage) -> bool {
    fn seg_bits(s: &[TrainingSegment]) -> Vec<(u64, u32)> {
        s.iter().map(|x| (x.learning_rate.to_bits(), x.epochs)).collect()
    }
    parent.layer_sizes == known.layer_sizes
        && parent.init_seed == known.init_seed
        && parent.train_records == known.train_records
        && seg_bits(&parent.segments) == seg_bits(&known.segments)
}

fn retrain(
    lineage: &TrainingLineage,
    train_set: &Dataset,
    verified: &HashMap<Digest, Verified>,
) -> Option<Model> {
    let shortcut = lineage.start_model.and_then(|d| verified.get(&d)).filter(|v| {
        lineage.parent().is_some_and(|p| same_prefix(&p, &v.lineage))
    });
    match shortcut {
        Some(v) => lineage.replay_last_from(&v.model, train_set).ok(),
        None => lineage.replay(train_set).ok(),
    }
}

fn check_height(
    block: &Block,
    prev: Option<&Block>,
    pruned: bool,
    train_set: &Dataset,
    test_set: Option<&Dataset>,
    verified: &mut HashMap<Digest, Verified>,
) -> HeightReport {
    let height = block.height();
    let mut issues = structure_issues(block, prev.map(|b| &b.header));
    if block.claimed_accuracy().is_none() {
        issues.push(crate::chain::StructureIssue::InvalidClaim);
    }
    let structure_ok = issues.is_empty();
    if pruned {
        return HeightReport { height, pruned, retrain_hash_match: true, accuracy_match: true, structure_ok };
    }
    let stored = block.model.as_ref().and_then(|b| b.decode().ok());
    let retrain_hash_match = match &block.training {
        Some(lineage) => match retrain(lineage, train_set, verified) {
            Some(model) => {
                let matches = model.hash().ok() == Some(block.header.model_hash)
                    && block.model.as_ref().is_some_and(|b| b.hash() == block.header.model_hash);
                if matches {
                    verified.insert(block.header.model_hash, Verified { model, lineage: lineage.clone() });
                }
                matches
            }
            None => false,
        },
        None => false,
    };
    let accuracy_match = match (stored, test_set, block.claimed_accuracy()) {
        (Some(m), Some(t), Some(claim)) => evaluate(&m, t).is_ok_and(|a| a == claim),
        _ => false,
    };
    HeightReport { height, pruned, retrain_hash_match, accuracy_match, structure_ok }
}

/// Full verification: every unpruned block's model is rebuilt from the
/// training set via its lineage and must hash to the header's model hash,
/// and must score exactly its claim on that height's test set. All blocks
/// get structure and linkage checks.
///
/// A lineage whose `start_model` is a model already rebuilt at a lower
/// height (with a matching lineage prefix) only replays its last segment.
pub fn verify_chain(
    store: &ChainStore,
    train_set: &Dataset,
    test_sets: &BTreeMap<u64, &Dataset>,
) -> Result<ChainVerificationReport, ConsensusError> {
    for b in store.blocks() {
        let h = b.height();
        if !store.is_pruned(h) && !test_sets.contains_key(&h) {
            return Err(ConsensusError::DatasetUnavailable { height: h });
        }
    }
    let mut verified = HashMap::new();
    let mut heights = Vec::with_capacity(store.len());
    let mut prev: Option<&Block> = None;
    for b in store.blocks() {
        let h = b.height();
        let test = test_sets.get(&h).copied();
        heights.push(check_height(b, prev, store.is_pruned(h), train_set, test, &mut verified));
        prev = Some(b);
    }
    let overall = heights.iter().all(HeightReport::ok);
    Ok(ChainVerificationReport { heights, overall })
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::*;
    use crate::chain::{prune_models, ModelBlob};
    use crate::dl::Accuracy;

    #[test]
    fn honest_chain_verifies() {
        let (store, train, tests) = honest_chain(4);
        let report = verify_chain(&store, &train, &test_map(&tests)).unwrap();
        assert!(report.overall, "{report:?}");
        assert_eq!(report.heights.len(), 4);
    }

    #[test]
    fn tampered_weight_byte_caught_at_its_height() {
        let (mut store, train, tests) = honest_chain(5);
        let b = store.get_mut(3).unwrap();
        let blob = b.model.as_mut().unwrap();
        let last = blob.0.len() - 1;
        blob.0[last] ^= 1;
        let report = verify_chain(&store, &train, &test_map(&tests)).unwrap();
        assert!(!report.overall);
        assert!(!report.heights[3].retrain_hash_match);
        assert_eq!(report.failed_heights(), vec![3]);
    }

    #[test]
    fn tampered_claim_caught() {
        let (mut store, train, tests) = honest_chain(4);
        let b = store.get_mut(2).unwrap();
        let c = b.revealed_accuracy.unwrap();
        let other = if c.correct() > 0 { c.correct() - 1 } else { 1 };
        b.revealed_accuracy = Some(Accuracy::new(other, c.total()).unwrap());
        let report = verify_chain(&store, &train, &test_map(&tests)).unwrap();
        assert!(!report.heights[2].accuracy_match);
        assert_eq!(report.failed_heights(), vec![2]);
    }

    #[test]
    fn pruned_heights_structure_only_and_full_replay_still_works() {
        let (mut store, train, tests) = honest_chain(5);
        prune_models(&mut store, 1).unwrap();
        let map = test_map(&tests);
        let report = verify_chain(&store, &train, &map).unwrap();
        assert!(report.overall, "{report:?}");
        assert_eq!(report.heights.iter().filter(|h| h.pruned).count(), 4);

        // A pruned block whose header was altered still fails structure.
        let h = *store.pruned_heights().iter().next().unwrap();
        store.get_mut(h).unwrap().header.created_at += 1;
        let report = verify_chain(&store, &train, &map).unwrap();
        assert!(!report.overall);
    }

    #[test]
    fn missing_dataset_is_an_error() {
        let (store, train, tests) = honest_chain(3);
        let mut map = test_map(&tests);
        map.remove(&1);
        assert_eq!(verify_chain(&store, &train, &map), Err(ConsensusError::DatasetUnavailable { height: 1 }));
    }

    #[test]
    fn model_not_reproducible_from_lineage() {
        let (mut store, train, tests) = honest_chain(3);
        // Swap in a different model and fix up the header so only retraining
        // can tell.
        let b = store.get_mut(2).unwrap();
        let mut m = b.model.as_ref().unwrap().decode().unwrap();
        m.biases[0][0] += 1e-3;
        b.model = Some(ModelBlob(m.serialize().unwrap()));
        b.header.model_hash = m.hash().unwrap();
        let report = verify_chain(&store, &train, &test_map(&tests)).unwrap();
        assert!(!report.heights[2].retrain_hash_match);
    }
}
