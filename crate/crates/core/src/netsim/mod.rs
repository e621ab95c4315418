//! Deterministic discrete-event simulation: a virtual millisecond clock,
//! delay models for message delivery, block-interval presets and the event
//! trace from which the recycling ratio is computed.

mod delay;
mod presets;
mod scheduler;
mod trace;

pub use delay::{DelayModel, DelaySampler};
pub use presets::Preset;
pub use scheduler::{EventId, Scheduler, SimEvent};
pub use trace::{read_trace, recycling_ratio, write_trace, TraceKind, TraceRecord};

/// Simulated time in milliseconds.
pub type SimTime = u64;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum NetsimError {
    #[error("negative delay {0} ms")]
    NegativeDelay(i64),
    #[error("event at {at} ms is before the current time {now} ms")]
    InThePast { at: SimTime, now: SimTime },
    #[error("delay range {lo}..={hi} is empty")]
    EmptyRange { lo: u64, hi: u64 },
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("trace io: {0}")]
    Io(String),
}
