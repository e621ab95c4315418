use super::hash::hash_pair;
use super::{ChainError, Digest, Transaction};

/// Merkle root over transaction hashes. Leaves are `H(serialize(tx))`; an odd
/// level duplicates its last node before pairing.
pub fn merkle_root(transactions: &[Transaction]) -> Result<Digest, ChainError> {
    if transactions.is_empty() {
        return Err(ChainError::EmptyBlock);
    }
    let mut level: Vec<Digest> = transactions.iter().map(Transaction::hash).collect();
    while level.len() > 1 {
        if level.len() % 2 == 1 {
            level.push(*level.last().unwrap());
        }
        level = level.chunks_exact(2).map(|p| hash_pair(&p[0], &p[1])).collect();
    }
    Ok(level[0])
}
