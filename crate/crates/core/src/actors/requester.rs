use num_rational::Ratio;

use super::ActorError;
use crate::dl::{generate_task_with, Accuracy, Dataset, TaskSpec};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RequesterAction {
    ReleaseTest(usize),
    CollectModelAndStop,
    /// The slot was already released.
    Continue,
}

/// The single party that owns the task: one training set reused for every
/// block and one fresh test set per round slot, released only when that
/// round's Phase 2 starts.
#[derive(Clone, Debug)]
pub struct ModelRequester {
    pub task_seed: u64,
    train_set: Dataset,
    test_schedule: Vec<Dataset>,
    released: Vec<bool>,
    pub stop_window: usize,
    pub stop_epsilon: Ratio<u128>,
}

fn ratio(a: Accuracy) -> Ratio<u128> {
    Ratio::new(a.correct() as u128, a.total() as u128)
}

impl ModelRequester {
    pub fn new(
        task_seed: u64,
        spec: &TaskSpec,
        n_train: usize,
        n_test_per_block: usize,
        slots: usize,
        stop_window: usize,
        stop_epsilon: Ratio<u128>,
    ) -> Result<Self, ActorError> {
        let (train_set, test_schedule) = generate_task_with(spec, task_seed, n_train, n_test_per_block, slots)?;
        Ok(Self::from_parts(task_seed, train_set, test_schedule, stop_window, stop_epsilon))
    }

    pub fn from_parts(
        task_seed: u64,
        train_set: Dataset,
        test_schedule: Vec<Dataset>,
        stop_window: usize,
        stop_epsilon: Ratio<u128>,
    ) -> Self {
        let released = vec![false; test_schedule.len()];
        ModelRequester { task_seed, train_set, test_schedule, released, stop_window, stop_epsilon }
    }

    pub fn train_set(&self) -> &Dataset {
        &self.train_set
    }

    pub fn slots(&self) -> usize {
        self.test_schedule.len()
    }

    /// True when the best accepted accuracy rose by less than `stop_epsilon`
    /// at each of the last `stop_window` blocks. A zero window or epsilon
    /// never stops.
    pub fn should_stop(&self, accepted: &[Accuracy]) -> bool {
        let w = self.stop_window;
        if w == 0 || accepted.len() <= w || self.stop_epsilon == Ratio::from_integer(0) {
            return false;
        }
        let mut best = Vec::with_capacity(accepted.len());
        for a in accepted {
            let r = ratio(*a);
            best.push(best.last().map_or(r, |b: &Ratio<u128>| r.max(*b)));
        }
        best.windows(2).rev().take(w).all(|p| p[1] - p[0] < self.stop_epsilon)
    }

    /// Called at the start of Phase 2 for round `slot` with the accuracies
    /// accepted so far.
    pub fn tick(&mut self, slot: usize, accepted: &[Accuracy]) -> Result<RequesterAction, ActorError> {
        if self.should_stop(accepted) {
            return Ok(RequesterAction::CollectModelAndStop);
        }
        match self.released.get_mut(slot) {
            None => Err(ActorError::ScheduleExhausted { slot }),
            Some(true) => Ok(RequesterAction::Continue),
            Some(r) => {
                *r = true;
                Ok(RequesterAction::ReleaseTest(slot))
            }
        }
    }

    /// A released test set.
    pub fn test_set(&self, slot: usize) -> Result<&Dataset, ActorError> {
        match self.released.get(slot) {
            Some(true) => Ok(&self.test_schedule[slot]),
            Some(false) => Err(ActorError::Unreleased { slot }),
            None => Err(ActorError::ScheduleExhausted { slot }),
        }
    }

    pub fn is_released(&self, slot: usize) -> bool {
        self.released.get(slot).copied().unwrap_or(false)
    }

    /// Every test set, released or not, for handing to verifiers after a run.
    pub fn schedule(&self) -> &[Dataset] {
        &self.test_schedule
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn requester(window: usize, eps: Ratio<u128>) -> ModelRequester {
        ModelRequester::new(1, &TaskSpec::default(), 20, 9, 3, window, eps).unwrap()
    }

    fn accs(v: &[(u64, u64)]) -> Vec<Accuracy> {
        v.iter().map(|&(c, t)| Accuracy::new(c, t).unwrap()).collect()
    }

    #[test]
    fn releases_in_order_then_exhausts() {
        let mut r = requester(0, Ratio::from_integer(0));
        assert!(r.test_set(0).is_err());
        assert_eq!(r.tick(0, &[]).unwrap(), RequesterAction::ReleaseTest(0));
        assert_eq!(r.tick(0, &[]).unwrap(), RequesterAction::Continue);
        assert_eq!(r.test_set(0).unwrap().id(), r.schedule()[0].id());
        assert_eq!(r.test_set(1), Err(ActorError::Unreleased { slot: 1 }));
        assert_eq!(r.tick(3, &[]), Err(ActorError::ScheduleExhausted { slot: 3 }));
    }

    #[test]
    fn stops_after_flat_window() {
        let mut r = requester(3, Ratio::new(1, 100));
        let flat = accs(&[(50, 100), (90, 100), (905, 1000), (91, 100), (912, 1000)]);
        assert_eq!(r.tick(0, &flat).unwrap(), RequesterAction::CollectModelAndStop);
        let improving = accs(&[(50, 100), (60, 100), (70, 100), (80, 100)]);
        assert_eq!(r.tick(0, &improving).unwrap(), RequesterAction::ReleaseTest(0));
        // Not enough history yet.
        assert!(!r.should_stop(&accs(&[(1, 2), (1, 2), (1, 2)])));
        // A drop counts as no improvement against the running best.
        assert!(r.should_stop(&accs(&[(1, 2), (9, 10), (8, 10), (8, 10), (9, 10)])));
    }

    #[test]
    fn zero_epsilon_never_stops() {
        let r = requester(2, Ratio::from_integer(0));
        assert!(!r.should_stop(&accs(&[(1, 2); 10])));
    }
}
