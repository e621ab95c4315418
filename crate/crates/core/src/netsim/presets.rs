use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::NetsimError;

/// Block-interval presets. Phase 1 spans the whole interval; Phase 2 is a
/// quarter of it and the per-round epoch budget scales with the interval so
/// that the Bitcoin preset gets 2400 epochs per block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Bitcoin,
    Litecoin,
    EthLike,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Bitcoin, Preset::Litecoin, Preset::EthLike];

    pub fn block_interval_ms(self) -> u64 {
        match self {
            Preset::Bitcoin => 600_000,
            Preset::Litecoin => 150_000,
            Preset::EthLike => 12_000,
        }
    }

    pub fn phase1_ms(self) -> u64 {
        self.block_interval_ms()
    }

    pub fn phase2_ms(self) -> u64 {
        self.block_interval_ms() / 4
    }

    pub fn epoch_budget(self) -> u32 {
        (self.block_interval_ms() / 250) as u32
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Bitcoin => "bitcoin",
            Preset::Litecoin => "litecoin",
            Preset::EthLike => "eth-like",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = NetsimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| NetsimError::UnknownPreset(s.to_string()))
    }
}
