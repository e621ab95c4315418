use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::DlError;

/// `correct / total`, compared as an exact rational by cross-multiplication.
/// Equality is rational equality, so `1/2 == 2/4`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Accuracy {
    correct: u64,
    total: u64,
}

impl Accuracy {
    pub const ZERO: Accuracy = Accuracy { correct: 0, total: 1 };
    pub const ONE: Accuracy = Accuracy { correct: 1, total: 1 };

    pub fn new(correct: u64, total: u64) -> Result<Self, DlError> {
        let acc = Accuracy { correct, total };
        if acc.is_valid() {
            Ok(acc)
        } else {
            Err(DlError::BadAccuracy { correct, total })
        }
    }

    pub fn correct(&self) -> u64 {
        self.correct
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// `total > 0 && correct <= total`. Values read from untrusted JSON may
    /// violate this; consensus checks it before trusting a claim.
    pub fn is_valid(&self) -> bool {
        self.total > 0 && self.correct <= self.total
    }

    pub fn as_f64(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }

    /// Numerator and denominator of `self - other` when non-negative.
    pub fn gain_over(&self, other: &Accuracy) -> Option<(u128, u128)> {
        let a = self.correct as u128 * other.total as u128;
        let b = other.correct as u128 * self.total as u128;
        (a >= b).then(|| (a - b, self.total as u128 * other.total as u128))
    }
}

impl PartialEq for Accuracy {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Accuracy {}

impl PartialOrd for Accuracy {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Accuracy {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.correct as u128 * other.total as u128).cmp(&(other.correct as u128 * self.total as u128))
    }
}

impl fmt::Display for Accuracy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.correct, self.total)
    }
}
