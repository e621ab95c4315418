use serde::{Deserialize, Serialize};

use super::NetsimError;
use crate::dl::rng::DetRng;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DelayModel {
    Constant { ms: u64 },
    /// Uniform over `lo..=hi`, drawn from a stream keyed by the run seed and
    /// `stream_seed`.
    UniformRange { lo: u64, hi: u64, stream_seed: u64 },
}

impl Default for DelayModel {
    fn default() -> Self {
        DelayModel::Constant { ms: 50 }
    }
}

impl DelayModel {
    pub fn validate(&self) -> Result<(), NetsimError> {
        match *self {
            DelayModel::UniformRange { lo, hi, .. } if lo > hi => Err(NetsimError::EmptyRange { lo, hi }),
            _ => Ok(()),
        }
    }

    pub fn max_delay(&self) -> u64 {
        match *self {
            DelayModel::Constant { ms } => ms,
            DelayModel::UniformRange { hi, .. } => hi,
        }
    }

    pub fn sampler(&self, master_seed: u64) -> Result<DelaySampler, NetsimError> {
        self.validate()?;
        let rng = match *self {
            DelayModel::Constant { .. } => None,
            DelayModel::UniformRange { stream_seed, .. } => Some(DetRng::new("podl/delay", master_seed, stream_seed)),
        };
        Ok(DelaySampler { model: self.clone(), rng })
    }
}

pub struct DelaySampler {
    model: DelayModel,
    rng: Option<DetRng>,
}

impl DelaySampler {
    pub fn sample(&mut self) -> u64 {
        match (&self.model, self.rng.as_mut()) {
            (DelayModel::UniformRange { lo, hi, .. }, Some(rng)) => lo + rng.below(hi - lo + 1),
            (DelayModel::Constant { ms }, _) => *ms,
            (DelayModel::UniformRange { lo, .. }, None) => *lo,
        }
    }
}
