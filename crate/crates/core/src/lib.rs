//! Proof-of-deep-learning blockchain at desk scale.
//!
//! Miners earn blocks by training a small neural network. A block is only
//! eligible if its header was committed before the per-height test set was
//! released, and full nodes accept the committed model with the highest
//! verified accuracy. Every accepted model can be re-derived from the training
//! set alone, which is what full-chain verification checks.
//!
//! Module map:
//!
//! - [`chain`]: digests, transactions, Merkle roots, headers, blocks, the
//!   append-only store and its JSON dump.
//! - [`dl`]: the deterministic work function (MLP + SGD), exact accuracy,
//!   canonical model bytes and the synthetic task generator.
//! - [`consensus`]: commitment log, submission ordering, acceptance,
//!   finality, retraining verification and the fork-choice rule.
//! - [`actors`]: model requester, miner strategies and full nodes.
//! - [`netsim`]: discrete-event scheduler, delay models and traces.
//! - [`sim`]: the scenario engine that drives actors through rounds.

pub mod actors;
pub mod chain;
pub mod consensus;
pub mod dl;
pub mod netsim;
pub mod sim;

pub use chain::{hash_bytes, Block, BlockHeader, ChainStore, Digest, Transaction};
pub use dl::{Accuracy, Dataset, Model, TrainingParams};
