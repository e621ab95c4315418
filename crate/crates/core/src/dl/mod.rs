//! The proof-of-deep-learning work function.
//!
//! A small fully connected network (ReLU hidden layers, softmax output)
//! trained by plain SGD on cross-entropy. Everything here is bit-reproducible:
//!
//! - weights come from [`rng::DetRng`], a ChaCha8 stream keyed by SHA-256 of a
//!   domain tag and the seed;
//! - sums are accumulated strictly left to right, no fused multiply-add is
//!   used, and `exp`/`ln` come from the pure-Rust `libm` port rather than the
//!   platform math library;
//! - records are visited in stored order, one update per record.
//!
//! Under those rules the same inputs give the same model bytes on any IEEE-754
//! binary64 machine with round-to-nearest-even, which is what chain
//! verification by retraining relies on.

mod accuracy;
mod dataset;
mod lineage;
mod model;
pub mod rng;
mod task;
mod train;

pub use accuracy::Accuracy;
pub use dataset::{Dataset, DatasetMeta, Record};
pub use lineage::{TrainingLineage, TrainingSegment};
pub use model::{feed_forward, init_weights, Activation, Model, TrainingParams};
pub use task::{generate_task, generate_task_with, Layout, TaskSpec};
pub use train::{evaluate, gradients, mean_loss, record_loss, train, train_on, Gradients};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DlError {
    #[error("bad architecture: {0}")]
    BadArchitecture(String),
    #[error("input has {found} features, model expects {expected}")]
    BadInput { expected: usize, found: usize },
    #[error("training diverged at epoch {epoch}, record {record}")]
    Diverged { epoch: u32, record: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("bad model: {0}")]
    BadModel(String),
    #[error("bad dataset: {0}")]
    BadDataset(String),
    #[error("accuracy {correct}/{total} is not a valid ratio")]
    BadAccuracy { correct: u64, total: u64 },
    #[error("io: {0}")]
    Io(String),
}
