use std::collections::BTreeMap;

use super::ConsensusError;
use crate::chain::{BlockHeader, Digest};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Commitment {
    pub header_hash: Digest,
    pub header: BlockHeader,
    pub received_at: u64,
}

#[derive(Clone, Debug, Default)]
struct HeightLog {
    start: u64,
    end: u64,
    entries: BTreeMap<Digest, Commitment>,
}

/// Phase-1 headers per height. A height accepts commitments only while its
/// window `[start, end]` is open; reopening a height (after a failed round)
/// discards what was committed before.
#[derive(Clone, Debug)]
pub struct CommitmentLog {
    heights: BTreeMap<u64, HeightLog>,
    cap_per_miner: usize,
}

impl Default for CommitmentLog {
    fn default() -> Self {
        Self::new(1)
    }
}

impl CommitmentLog {
    pub fn new(cap_per_miner: usize) -> Self {
        CommitmentLog { heights: BTreeMap::new(), cap_per_miner: cap_per_miner.max(1) }
    }

    pub fn open_window(&mut self, height: u64, start: u64, end: u64) {
        self.heights.insert(height, HeightLog { start, end, entries: BTreeMap::new() });
    }

    /// Records `header`; `Ok(false)` means it was already recorded.
    pub fn commit_header(&mut self, height: u64, header: BlockHeader, now: u64) -> Result<bool, ConsensusError> {
        let log = match self.heights.get_mut(&height) {
            Some(l) if (l.start..=l.end).contains(&now) => l,
            _ => return Err(ConsensusError::PhaseClosed { height, now }),
        };
        if header.height != height {
            return Err(ConsensusError::WrongHeight { expected: height, found: header.height });
        }
        let hash = header.hash();
        if log.entries.contains_key(&hash) {
            return Ok(false);
        }
        let held = log.entries.values().filter(|c| c.header.miner_id == header.miner_id).count();
        if held >= self.cap_per_miner {
            return Err(ConsensusError::CommitmentCap { miner: header.miner_id, height, cap: self.cap_per_miner });
        }
        log.entries.insert(hash, Commitment { header_hash: hash, header, received_at: now });
        Ok(true)
    }

    pub fn is_committed(&self, height: u64, header_hash: &Digest) -> bool {
        self.heights.get(&height).is_some_and(|l| l.entries.contains_key(header_hash))
    }

    pub fn commitments(&self, height: u64) -> impl Iterator<Item = &Commitment> {
        self.heights.get(&height).into_iter().flat_map(|l| l.entries.values())
    }

    pub fn window(&self, height: u64) -> Option<(u64, u64)> {
        self.heights.get(&height).map(|l| (l.start, l.end))
    }
}
