//! The parties: one model requester, miners with pluggable strategies, and
//! full nodes that apply the consensus rules to what the network delivers.

mod full_node;
mod miner;
mod requester;

pub use full_node::FullNodeActor;
pub use miner::{MinerActor, OverfitReport, PendingBlock, RoundContext, Strategy};
pub use requester::{ModelRequester, RequesterAction};

use crate::chain::ChainError;
use crate::consensus::ConsensusError;
use crate::dl::DlError;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum ActorError {
    #[error("test schedule exhausted at slot {slot}")]
    ScheduleExhausted { slot: usize },
    #[error("test set {slot} read before its release")]
    Unreleased { slot: usize },
    #[error("bad actor config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Model(#[from] DlError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
}
