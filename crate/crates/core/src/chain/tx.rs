use serde::{Deserialize, Serialize};

use super::codec::Encoder;
use super::{hash_bytes, Digest};

/// A transaction. Transfer payloads are opaque; no script or balance
/// semantics are attached to them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transaction {
    Transfer {
        #[serde(with = "crate::chain::serde_b64")]
        payload: Vec<u8>,
    },
    Coinbase {
        reward: u64,
        #[serde(with = "crate::chain::serde_b64")]
        recipient: Vec<u8>,
        #[serde(with = "crate::chain::serde_b64")]
        payload: Vec<u8>,
    },
}

impl Transaction {
    pub fn coinbase(reward: u64, recipient: impl Into<Vec<u8>>) -> Self {
        Transaction::Coinbase { reward, recipient: recipient.into(), payload: Vec::new() }
    }

    pub fn transfer(payload: impl Into<Vec<u8>>) -> Self {
        Transaction::Transfer { payload: payload.into() }
    }

    pub fn is_coinbase(&self) -> bool {
        matches!(self, Transaction::Coinbase { .. })
    }

    /// Canonical bytes: tag `0x00` transfer / `0x01` coinbase, then fields.
    pub fn serialize(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        match self {
            Transaction::Transfer { payload } => {
                enc.u8(0).bytes(payload);
            }
            Transaction::Coinbase { reward, recipient, payload } => {
                enc.u8(1).u64(*reward).bytes(recipient).bytes(payload);
            }
        }
        enc.finish()
    }

    pub fn hash(&self) -> Digest {
        hash_bytes(&self.serialize())
    }
}

/// Counts coinbases and checks the single-leading-coinbase rule.
pub(crate) fn coinbase_rule_holds(txs: &[Transaction]) -> bool {
    txs.first().is_some_and(Transaction::is_coinbase)
        && txs.iter().filter(|t| t.is_coinbase()).count() == 1
}
