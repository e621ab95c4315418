//! JSON chain dump. Digests are lowercase hex, model bytes and transaction
//! payloads are standard base64. `docs/chain-dump.md` documents the schema.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Block, ChainError, ChainStore, Digest};

pub const DUMP_FORMAT: &str = "podl-chain-dump/1";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DumpBlock {
    /// Informational; recomputed on load.
    pub header_hash: Digest,
    /// Dataset id of the test set this height was validated against.
    pub test_set_id: Digest,
    #[serde(flatten)]
    pub block: Block,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainDump {
    pub format: String,
    pub train_set_id: Digest,
    pub pruned_heights: Vec<u64>,
    pub blocks: Vec<DumpBlock>,
}

impl ChainDump {
    pub fn new(store: &ChainStore, train_set_id: Digest, test_set_ids: &[Digest]) -> Result<Self, ChainError> {
        if test_set_ids.len() != store.len() {
            return Err(ChainError::DumpCorrupt(format!(
                "{} test set ids for {} blocks",
                test_set_ids.len(),
                store.len()
            )));
        }
        Ok(ChainDump {
            format: DUMP_FORMAT.to_string(),
            train_set_id,
            pruned_heights: store.pruned_heights().iter().copied().collect(),
            blocks: store
                .blocks()
                .iter()
                .zip(test_set_ids)
                .map(|(b, &t)| DumpBlock { header_hash: b.hash(), test_set_id: t, block: b.clone() })
                .collect(),
        })
    }

    /// Turns the dump back into a store without checking header linkage, so a
    /// tampered dump still loads and verification can point at the height.
    /// Fails only on shape problems: out-of-order heights, or an unpruned
    /// height missing its model or lineage.
    pub fn into_store(self) -> Result<(ChainStore, Vec<Digest>), ChainError> {
        if self.format != DUMP_FORMAT {
            return Err(ChainError::DumpCorrupt(format!("unknown format {:?}", self.format)));
        }
        let pruned: BTreeSet<u64> = self.pruned_heights.iter().copied().collect();
        let mut blocks = Vec::with_capacity(self.blocks.len());
        let mut tests = Vec::with_capacity(self.blocks.len());
        for (i, db) in self.blocks.into_iter().enumerate() {
            let h = db.block.header.height;
            if h != i as u64 {
                return Err(ChainError::DumpCorrupt(format!("entry {i} carries height {h}")));
            }
            if !pruned.contains(&h) && (db.block.model.is_none() || db.block.training.is_none()) {
                return Err(ChainError::DumpCorrupt(format!(
                    "height {h} is not pruned but has no model bytes or training lineage"
                )));
            }
            tests.push(db.test_set_id);
            blocks.push(db.block);
        }
        Ok((ChainStore::from_parts_unchecked(blocks, pruned), tests))
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let json = serde_json::to_vec_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(path, json)
    }

    pub fn read(path: &Path) -> Result<Self, ChainError> {
        let bytes = std::fs::read(path).map_err(|e| ChainError::DumpCorrupt(format!("{}: {e}", path.display())))?;
        serde_json::from_slice(&bytes).map_err(|e| ChainError::DumpCorrupt(e.to_string()))
    }
}
