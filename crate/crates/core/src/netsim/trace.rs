use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::{NetsimError, SimTime};
use crate::chain::Digest;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    Phase1Start,
    Phase1End,
    TestRelease,
    Phase2Start,
    Phase2End,
    HeaderCommit,
    CommitRejected,
    Submission,
    LateSubmission,
    Accepted,
    RoundFailed,
    RequesterStop,
    /// Miner compute spent training, `time..end`.
    TrainSpan,
    /// Miner compute spent evaluating models, `time..end`.
    ValidateSpan,
    /// The accounting window of one round, `time..end`.
    RoundClosed,
}

/// One trace line. Message events name a sender and receiver; span events
/// carry `end`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time: SimTime,
    #[serde(rename = "type")]
    pub kind: TraceKind,
    pub sender: String,
    pub receiver: String,
    pub round: u64,
    pub height: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload_digest: Option<Digest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<SimTime>,
}

impl TraceRecord {
    pub fn span(&self) -> Option<u64> {
        self.end.map(|e| e.saturating_sub(self.time))
    }
}

/// Training time over available time: the sum of every miner's `TrainSpan`
/// lengths divided by (number of training miners) × (sum of `RoundClosed`
/// window lengths). `None` when the trace has no rounds or no training.
pub fn recycling_ratio(trace: &[TraceRecord]) -> Option<Ratio<u128>> {
    let mut train = 0u128;
    let mut rounds = 0u128;
    let mut miners = BTreeSet::new();
    for r in trace {
        match r.kind {
            TraceKind::TrainSpan => {
                train += r.span().unwrap_or(0) as u128;
                miners.insert(r.sender.as_str());
            }
            TraceKind::RoundClosed => rounds += r.span().unwrap_or(0) as u128,
            _ => {}
        }
    }
    if rounds == 0 || miners.is_empty() {
        return None;
    }
    Some(Ratio::new(train, rounds * miners.len() as u128))
}

pub fn write_trace<W: Write>(mut out: W, trace: &[TraceRecord]) -> Result<(), NetsimError> {
    for r in trace {
        let line = serde_json::to_string(r).map_err(|e| NetsimError::Io(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| NetsimError::Io(e.to_string()))?;
    }
    Ok(())
}

pub fn read_trace<R: BufRead>(input: R) -> Result<Vec<TraceRecord>, NetsimError> {
    input
        .lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| {
            let l = l.map_err(|e| NetsimError::Io(e.to_string()))?;
            serde_json::from_str(&l).map_err(|e| NetsimError::Io(e.to_string()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn span(kind: TraceKind, who: &str, start: u64, end: u64) -> TraceRecord {
        TraceRecord {
            time: start,
            kind,
            sender: who.into(),
            receiver: String::new(),
            round: 0,
            height: 0,
            payload_digest: None,
            end: Some(end),
        }
    }

    #[test]
    fn no_overhead_is_one() {
        let t = vec![span(TraceKind::RoundClosed, "", 0, 100), span(TraceKind::TrainSpan, "m", 0, 100)];
        assert_eq!(recycling_ratio(&t), Some(Ratio::from_integer(1)));
    }

    #[test]
    fn validation_equal_to_training_is_half() {
        let t = vec![
            span(TraceKind::RoundClosed, "", 0, 100),
            span(TraceKind::ValidateSpan, "m", 0, 50),
            span(TraceKind::TrainSpan, "m", 50, 100),
        ];
        assert_eq!(recycling_ratio(&t), Some(Ratio::new(1, 2)));
    }

    #[test]
    fn aggregates_over_miners_and_rounds() {
        let t = vec![
            span(TraceKind::RoundClosed, "", 0, 100),
            span(TraceKind::RoundClosed, "", 100, 200),
            span(TraceKind::TrainSpan, "a", 10, 100),
            span(TraceKind::TrainSpan, "a", 110, 200),
            span(TraceKind::TrainSpan, "b", 30, 100),
            span(TraceKind::TrainSpan, "b", 130, 200),
        ];
        assert_eq!(recycling_ratio(&t), Some(Ratio::new(320, 400)));
        assert_eq!(recycling_ratio(&t[2..]), None);
    }

    #[test]
    fn jsonl_round_trip() {
        let mut r = span(TraceKind::TrainSpan, "a", 1, 2);
        r.payload_digest = Some(crate::chain::hash_bytes(b"x"));
        let mut buf = Vec::new();
        write_trace(&mut buf, &[r.clone(), r.clone()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().next().unwrap().contains("\"type\":\"train_span\""));
        assert_eq!(read_trace(&buf[..]).unwrap(), vec![r.clone(), r]);
    }
}
