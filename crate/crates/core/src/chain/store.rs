use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Block, BlockHeader, ChainError, Digest};
use crate::dl::Accuracy;

/// Append-only, height-indexed chain. Every appended height is final for the
/// node that owns the store.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainStore {
    blocks: Vec<Block>,
    pruned_heights: BTreeSet<u64>,
}

impl ChainStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds a store from blocks, checking header linkage only.
    pub fn from_blocks(blocks: Vec<Block>, pruned_heights: BTreeSet<u64>) -> Result<Self, ChainError> {
        let mut store = ChainStore::new();
        for b in blocks {
            store.append(b)?;
        }
        store.pruned_heights = pruned_heights;
        Ok(store)
    }

    /// Used by the dump loader: no linkage checks, so verification can report
    /// per-height failures on tampered input.
    pub(crate) fn from_parts_unchecked(blocks: Vec<Block>, pruned_heights: BTreeSet<u64>) -> Self {
        ChainStore { blocks, pruned_heights }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn tip_height(&self) -> Option<u64> {
        self.blocks.last().map(Block::height)
    }

    pub fn tip(&self) -> Option<&Block> {
        self.blocks.last()
    }

    /// Height the next appended block must carry.
    pub fn next_height(&self) -> u64 {
        self.blocks.len() as u64
    }

    pub fn tip_hash(&self) -> Digest {
        self.blocks.last().map(Block::hash).unwrap_or(Digest::ZERO)
    }

    pub fn get(&self, height: u64) -> Option<&Block> {
        self.blocks.get(usize::try_from(height).ok()?)
    }

    pub(crate) fn get_mut(&mut self, height: u64) -> Option<&mut Block> {
        self.blocks.get_mut(usize::try_from(height).ok()?)
    }

    pub fn header(&self, height: u64) -> Option<&BlockHeader> {
        self.get(height).map(|b| &b.header)
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn pruned_heights(&self) -> &BTreeSet<u64> {
        &self.pruned_heights
    }

    pub fn is_pruned(&self, height: u64) -> bool {
        self.pruned_heights.contains(&height)
    }

    /// Appends onto the tip; height and previous-hash linkage must match.
    pub fn append(&mut self, block: Block) -> Result<(), ChainError> {
        let expected_height = self.next_height();
        let expected_prev = self.tip_hash();
        if block.header.height != expected_height || block.header.prev_header_hash != expected_prev {
            return Err(ChainError::Linkage {
                expected_height,
                found_height: block.header.height,
            });
        }
        self.blocks.push(block);
        Ok(())
    }

    /// Checks contiguous heights and previous-hash linkage over all headers.
    pub fn headers_linked(&self) -> bool {
        let mut prev = Digest::ZERO;
        for (i, b) in self.blocks.iter().enumerate() {
            if b.header.height != i as u64 || b.header.prev_header_hash != prev {
                return false;
            }
            prev = b.hash();
        }
        true
    }

    /// Claimed accuracy per height; `None` for blocks without a claim.
    pub fn accuracies(&self) -> Vec<Option<Accuracy>> {
        self.blocks.iter().map(Block::claimed_accuracy).collect()
    }

    /// Highest claim on the chain, with its height (latest height on ties).
    pub fn max_accuracy(&self) -> Option<(u64, Accuracy)> {
        self.blocks
            .iter()
            .filter_map(|b| b.claimed_accuracy().map(|a| (b.height(), a)))
            .fold(None, |best, (h, a)| match best {
                Some((_, ba)) if ba > a => best,
                _ => Some((h, a)),
            })
    }
}

/// Drops model bytes and training lineage from every block outside the
/// `keep_top_k` highest-accuracy ones. Among equal accuracies the later block
/// is kept. Headers are never touched. Returns the number of blocks whose
/// proof material was removed by this call.
pub fn prune_models(store: &mut ChainStore, keep_top_k: usize) -> Result<usize, ChainError> {
    if keep_top_k == 0 {
        return Err(ChainError::KeepTopKZero);
    }
    let mut ranked: Vec<(Accuracy, u64)> = store
        .blocks
        .iter()
        .map(|b| (b.claimed_accuracy().unwrap_or(Accuracy::ZERO), b.height()))
        .collect();
    ranked.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.cmp(&a.1)));
    let keep: BTreeSet<u64> = ranked.iter().take(keep_top_k).map(|&(_, h)| h).collect();

    let mut pruned = 0;
    for h in 0..store.next_height() {
        if keep.contains(&h) {
            continue;
        }
        let block = store.get_mut(h).expect("height in range");
        if block.model.is_some() || block.training.is_some() {
            block.model = None;
            block.training = None;
            pruned += 1;
        }
        store.pruned_heights.insert(h);
    }
    Ok(pruned)
}
