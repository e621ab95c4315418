use std::fmt;

use serde::{Deserialize, Serialize};

use super::codec::Encoder;
use super::tx::coinbase_rule_holds;
use super::{hash_bytes, merkle_root, ChainError, Digest, Transaction};
use crate::dl::{Accuracy, Model, TrainingLineage};

/// Miner identity as carried in headers.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MinerId(pub String);

impl MinerId {
    pub fn new(s: impl Into<String>) -> Self {
        MinerId(s.into())
    }
}

impl fmt::Display for MinerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Canonical model bytes as stored in a block. Opaque at this layer; decoded
/// with [`Model::deserialize`] by consensus code.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelBlob(#[serde(with = "crate::chain::serde_b64")] pub Vec<u8>);

impl ModelBlob {
    pub fn hash(&self) -> Digest {
        hash_bytes(&self.0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn decode(&self) -> Result<Model, crate::dl::DlError> {
        Model::deserialize(&self.0)
    }
}

impl fmt::Debug for ModelBlob {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ModelBlob({} bytes, {:?})", self.0.len(), self.hash())
    }
}

/// Block header. There is no nonce or target: the proof is the committed
/// model, not a hash below a threshold.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockHeader {
    pub height: u64,
    pub prev_header_hash: Digest,
    pub merkle_root: Digest,
    pub model_hash: Digest,
    /// `None` is the commit-time placeholder; the binding claim then travels
    /// with the reveal (see [`Block::revealed_accuracy`]).
    pub claimed_accuracy: Option<Accuracy>,
    pub miner_id: MinerId,
    pub created_at: u64,
}

impl BlockHeader {
    /// Canonical header bytes:
    ///
    /// | field            | width      | encoding                          |
    /// |------------------|------------|-----------------------------------|
    /// | height           | 8          | u64 LE                            |
    /// | prev_header_hash | 32         | raw                               |
    /// | merkle_root      | 32         | raw                               |
    /// | model_hash       | 32         | raw                               |
    /// | claim tag        | 1          | 0 = placeholder, 1 = present      |
    /// | claim            | 0 or 16    | correct u64 LE, total u64 LE      |
    /// | miner_id         | 4 + n      | u32 LE length, UTF-8 bytes        |
    /// | created_at       | 8          | u64 LE                            |
    pub fn serialize(&self) -> Vec<u8> {
        let mut enc = Encoder::with_capacity(128);
        enc.u64(self.height)
            .digest(&self.prev_header_hash)
            .digest(&self.merkle_root)
            .digest(&self.model_hash);
        match &self.claimed_accuracy {
            None => {
                enc.u8(0);
            }
            Some(acc) => {
                enc.u8(1).u64(acc.correct()).u64(acc.total());
            }
        }
        enc.bytes(self.miner_id.0.as_bytes()).u64(self.created_at);
        enc.finish()
    }

    pub fn hash(&self) -> Digest {
        hash_bytes(&self.serialize())
    }
}

/// A block: header, transactions, and the prunable proof material.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub header: BlockHeader,
    pub transactions: Vec<Transaction>,
    /// Accuracy claimed at reveal time. Not covered by the header hash;
    /// it is checked against the model by evaluation instead.
    #[serde(default)]
    pub revealed_accuracy: Option<Accuracy>,
    #[serde(default)]
    pub model: Option<ModelBlob>,
    #[serde(default)]
    pub training: Option<TrainingLineage>,
}

impl Block {
    pub fn hash(&self) -> Digest {
        self.header.hash()
    }

    pub fn height(&self) -> u64 {
        self.header.height
    }

    /// The binding claim: the header's if it carries one, otherwise the
    /// reveal-time claim.
    pub fn claimed_accuracy(&self) -> Option<Accuracy> {
        self.header.claimed_accuracy.or(self.revealed_accuracy)
    }

    pub fn is_pruned(&self) -> bool {
        self.model.is_none()
    }
}

/// Arguments to [`make_block`].
#[derive(Clone, Debug)]
pub struct BlockTemplate<'a> {
    pub height: u64,
    pub prev_header_hash: Digest,
    pub transactions: Vec<Transaction>,
    pub model: &'a Model,
    pub training: Option<TrainingLineage>,
    pub claimed_accuracy: Option<Accuracy>,
    pub miner_id: MinerId,
    pub now: u64,
}

/// Builds a block whose header binds the Merkle root and the model hash.
pub fn make_block(t: BlockTemplate<'_>) -> Result<Block, ChainError> {
    if !coinbase_rule_holds(&t.transactions) {
        return Err(ChainError::CoinbaseViolation {
            coinbases: t.transactions.iter().filter(|x| x.is_coinbase()).count(),
        });
    }
    let merkle_root = merkle_root(&t.transactions)?;
    let blob = ModelBlob(t.model.serialize()?);
    let header = BlockHeader {
        height: t.height,
        prev_header_hash: t.prev_header_hash,
        merkle_root,
        model_hash: blob.hash(),
        claimed_accuracy: t.claimed_accuracy,
        miner_id: t.miner_id,
        created_at: t.now,
    };
    Ok(Block {
        header,
        transactions: t.transactions,
        revealed_accuracy: None,
        model: Some(blob),
        training: t.training,
    })
}

/// One reason a block fails structural verification.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureIssue {
    HeightMismatch { expected: u64, found: u64 },
    PrevHashMismatch,
    MerkleMismatch,
    NoTransactions,
    CoinbaseViolation,
    ModelHashMismatch,
    ClaimConflict,
    InvalidClaim,
}

/// All structural problems of `block` relative to `prev` (`None` means the
/// genesis sentinel: height 0 and an all-zero previous hash).
pub fn structure_issues(block: &Block, prev: Option<&BlockHeader>) -> Vec<StructureIssue> {
    let mut issues = Vec::new();
    let h = &block.header;
    let (expected_height, expected_prev) = match prev {
        None => (0, Digest::ZERO),
        Some(p) => (p.height + 1, p.hash()),
    };
    if h.height != expected_height {
        issues.push(StructureIssue::HeightMismatch { expected: expected_height, found: h.height });
    }
    if h.prev_header_hash != expected_prev {
        issues.push(StructureIssue::PrevHashMismatch);
    }
    match merkle_root(&block.transactions) {
        Ok(root) if root == h.merkle_root => {}
        Ok(_) => issues.push(StructureIssue::MerkleMismatch),
        Err(_) => issues.push(StructureIssue::NoTransactions),
    }
    if !block.transactions.is_empty() && !coinbase_rule_holds(&block.transactions) {
        issues.push(StructureIssue::CoinbaseViolation);
    }
    if let Some(blob) = &block.model {
        if blob.hash() != h.model_hash {
            issues.push(StructureIssue::ModelHashMismatch);
        }
    }
    if let (Some(a), Some(b)) = (h.claimed_accuracy, block.revealed_accuracy) {
        if a != b {
            issues.push(StructureIssue::ClaimConflict);
        }
    }
    for acc in [h.claimed_accuracy, block.revealed_accuracy].into_iter().flatten() {
        if !acc.is_valid() {
            issues.push(StructureIssue::InvalidClaim);
        }
    }
    issues
}

/// Linkage, Merkle root, coinbase rule, model binding and claim consistency.
pub fn verify_structure(block: &Block, prev: Option<&BlockHeader>) -> bool {
    structure_issues(block, prev).is_empty()
}
