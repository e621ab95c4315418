//! Chain primitives: digests, transactions, Merkle roots, headers, blocks and
//! the append-only store.
//!
//! All hashed structures use the canonical encoding in `codec`: fixed field
//! order, little-endian fixed-width integers, `u32`-length-prefixed byte
//! fields. `docs/serialization.md` at the repository root lists the layouts.

mod block;
pub(crate) mod codec;
mod dump;
mod hash;
mod merkle;
mod store;
mod tx;

pub use block::{
    make_block, structure_issues, verify_structure, Block, BlockHeader, BlockTemplate, MinerId, ModelBlob,
    StructureIssue,
};
pub use dump::{ChainDump, DumpBlock, DUMP_FORMAT};
pub use hash::{hash_bytes, Digest};
pub use merkle::merkle_root;
pub use store::{prune_models, ChainStore};
pub use tx::Transaction;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChainError {
    #[error("block has no transactions")]
    EmptyBlock,
    #[error("a block needs exactly one coinbase, in first position (found {coinbases})")]
    CoinbaseViolation { coinbases: usize },
    #[error("block at height {found_height} does not extend the tip (expected height {expected_height})")]
    Linkage { expected_height: u64, found_height: u64 },
    #[error("keep_top_k must be at least 1")]
    KeepTopKZero,
    #[error("model: {0}")]
    Model(#[from] crate::dl::DlError),
    #[error("corrupt chain dump: {0}")]
    DumpCorrupt(String),
}

/// Base64 (standard alphabet, padded) for byte fields in JSON.
pub(crate) mod serde_b64 {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        STANDARD.decode(s).map_err(serde::de::Error::custom)
    }
}
