use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use super::{NetsimError, SimTime};

pub type EventId = u64;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimEvent<P> {
    pub fire_at: SimTime,
    pub seq: EventId,
    pub payload: P,
}

struct Queued<P>(SimEvent<P>);

impl<P> PartialEq for Queued<P> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<P> Eq for Queued<P> {}

impl<P> PartialOrd for Queued<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Queued<P> {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.0.fire_at, self.0.seq).cmp(&(other.0.fire_at, other.0.seq))
    }
}

/// Single-threaded event queue. Events fire in `(fire_at, seq)` order, where
/// `seq` is the scheduling order, so equal-time events are FIFO.
pub struct Scheduler<P> {
    now: SimTime,
    next_seq: EventId,
    queue: BinaryHeap<Reverse<Queued<P>>>,
}

impl<P> Default for Scheduler<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> Scheduler<P> {
    pub fn new() -> Self {
        Scheduler { now: 0, next_seq: 0, queue: BinaryHeap::new() }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Enqueues `payload` to fire `delay` ms from now.
    pub fn schedule(&mut self, delay: i64, payload: P) -> Result<EventId, NetsimError> {
        let delay = u64::try_from(delay).map_err(|_| NetsimError::NegativeDelay(delay))?;
        self.schedule_at(self.now + delay, payload)
    }

    pub fn schedule_at(&mut self, at: SimTime, payload: P) -> Result<EventId, NetsimError> {
        if at < self.now {
            return Err(NetsimError::InThePast { at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Reverse(Queued(SimEvent { fire_at: at, seq, payload })));
        Ok(seq)
    }

    /// Removes the next event and advances the clock to its time.
    pub fn pop(&mut self) -> Option<SimEvent<P>> {
        let Reverse(Queued(ev)) = self.queue.pop()?;
        debug_assert!(ev.fire_at >= self.now);
        self.now = ev.fire_at;
        Some(ev)
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.queue.peek().map(|Reverse(Queued(ev))| ev.fire_at)
    }
}
