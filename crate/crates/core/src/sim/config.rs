use serde::{Deserialize, Serialize};

use super::SimError;
use crate::consensus::{ForkRule, RoundConfig};
use crate::dl::TaskSpec;
use crate::netsim::{DelayModel, Preset};
use crate::actors::Strategy;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingConfig {
    /// Miners commit this long before Phase 1 ends.
    pub commit_lead_ms: u64,
    /// Per-round miner time not spent training (self-validation, block
    /// assembly), charged at the start of each round.
    pub miner_overhead_ms: u64,
    pub delay: DelayModel,
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig { commit_lead_ms: 1000, miner_overhead_ms: 1960, delay: DelayModel::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden_layers: Vec<usize>,
    pub learning_rate: f64,
    pub lr_jitter: f64,
    pub checkpoints: u32,
    pub held_out_percent: u32,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { hidden_layers: vec![32, 32], learning_rate: 1e-5, lr_jitter: 0.2, checkpoints: 4, held_out_percent: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RequesterConfig {
    /// Defaults to the scenario seed.
    pub task_seed: Option<u64>,
    pub n_train: usize,
    pub n_test_per_block: usize,
    pub stop_window: usize,
    /// Exact rational `numerator / denominator`; zero never stops.
    pub stop_epsilon: (u64, u64),
    /// Test sets generated beyond one per round.
    pub extra_test_sets: usize,
    pub task: TaskSpec,
}

impl Default for RequesterConfig {
    fn default() -> Self {
        RequesterConfig {
            task_seed: None,
            n_train: 150,
            n_test_per_block: 1800,
            stop_window: 3,
            stop_epsilon: (0, 1),
            extra_test_sets: 1,
            task: TaskSpec::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinerConfig {
    pub id: String,
    pub strategy: Strategy,
    pub compute_share: f64,
    #[serde(default)]
    pub learning_rate: Option<f64>,
}

impl MinerConfig {
    pub fn new(id: impl Into<String>, strategy: Strategy, compute_share: f64) -> Self {
        MinerConfig { id: id.into(), strategy, compute_share, learning_rate: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub rounds: u64,
    pub epoch_budget: u32,
    pub full_nodes: usize,
    pub prune_keep: Option<usize>,
    pub fork_rule: ForkRule,
    pub round: RoundConfig,
    pub timing: TimingConfig,
    pub model: ModelConfig,
    pub requester: RequesterConfig,
    pub miners: Vec<MinerConfig>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let mut cfg = ScenarioConfig {
            seed: 1,
            rounds: 10,
            epoch_budget: 0,
            full_nodes: 1,
            prune_keep: None,
            fork_rule: ForkRule::default(),
            round: RoundConfig::default(),
            timing: TimingConfig::default(),
            model: ModelConfig::default(),
            requester: RequesterConfig::default(),
            miners: (0..4).map(|i| MinerConfig::new(format!("miner-{i}"), Strategy::Honest, 0.25)).collect(),
        };
        cfg.apply_preset(Preset::Bitcoin);
        cfg
    }
}

impl ScenarioConfig {
    /// Sets both phase lengths and the epoch budget from a preset.
    pub fn apply_preset(&mut self, preset: Preset) {
        self.round.phase1_ms = preset.phase1_ms();
        self.round.phase2_ms = preset.phase2_ms();
        self.epoch_budget = preset.epoch_budget();
    }

    /// A small, fast scenario for statistical sweeps: eth-like timing, one
    /// 16-unit hidden layer, a larger step size and 300-record test sets.
    pub fn quick(seed: u64, rounds: u64) -> Self {
        let mut cfg = ScenarioConfig::default().with_preset(Preset::EthLike);
        cfg.seed = seed;
        cfg.rounds = rounds;
        cfg.model.hidden_layers = vec![16];
        cfg.model.learning_rate = 1e-4;
        cfg.requester.n_test_per_block = 300;
        cfg
    }

    pub fn with_preset(mut self, preset: Preset) -> Self {
        self.apply_preset(preset);
        self
    }

    pub fn task_seed(&self) -> u64 {
        self.requester.task_seed.unwrap_or(self.seed)
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let t = &self.requester.task;
        let mut v = vec![t.input_dim];
        v.extend(&self.model.hidden_layers);
        v.push(t.num_classes);
        v
    }

    /// Length of the window a round is charged for: Phase 1 alone when the
    /// next round overlaps this round's Phase 2, both phases otherwise.
    pub fn round_window_ms(&self) -> u64 {
        if self.round.pipeline_phases {
            self.round.phase1_ms
        } else {
            self.round.phase1_ms + self.round.phase2_ms
        }
    }

    /// Per-miner training time in a round: from the end of the overhead to
    /// the commitment.
    pub fn train_window_ms(&self) -> u64 {
        self.round.phase1_ms - self.timing.commit_lead_ms - self.timing.miner_overhead_ms
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |s: String| Err(SimError::Config(s));
        self.round.validate().map_err(|e| SimError::Config(e.to_string()))?;
        self.timing.delay.validate().map_err(|e| SimError::Config(e.to_string()))?;
        if self.rounds == 0 {
            return bad("rounds must be at least 1".into());
        }
        if self.full_nodes == 0 {
            return bad("full_nodes must be at least 1".into());
        }
        if self.timing.commit_lead_ms + self.timing.miner_overhead_ms >= self.round.phase1_ms {
            return bad(format!(
                "commit_lead_ms + miner_overhead_ms ({}) must be below phase1_ms ({})",
                self.timing.commit_lead_ms + self.timing.miner_overhead_ms,
                self.round.phase1_ms
            ));
        }
        if self.round.pipeline_phases && self.round.phase2_ms > self.round.phase1_ms - self.timing.commit_lead_ms {
            return bad("with pipelined phases, phase2_ms must not exceed phase1_ms - commit_lead_ms".into());
        }
        if self.prune_keep == Some(0) {
            return bad("prune_keep must be at least 1".into());
        }
        let m = &self.model;
        if m.hidden_layers.contains(&0) {
            return bad("hidden layer widths must be positive".into());
        }
        if !(m.learning_rate.is_finite() && m.learning_rate > 0.0) || !(0.0..1.0).contains(&m.lr_jitter) {
            return bad("learning_rate must be positive and lr_jitter in [0, 1)".into());
        }
        if m.held_out_percent >= 100 || m.checkpoints == 0 {
            return bad("held_out_percent must be below 100 and checkpoints positive".into());
        }
        let r = &self.requester;
        if r.n_train < 2 || r.n_test_per_block == 0 {
            return bad("n_train must be at least 2 and n_test_per_block positive".into());
        }
        if r.stop_epsilon.1 == 0 {
            return bad("stop_epsilon denominator must be positive".into());
        }
        if self.miners.is_empty() {
            return bad("at least one miner is required".into());
        }
        let mut ids = std::collections::BTreeSet::new();
        let mut total = 0.0;
        for mc in &self.miners {
            if mc.id.is_empty() || !ids.insert(mc.id.as_str()) {
                return bad(format!("miner id {:?} is empty or repeated", mc.id));
            }
            if !(mc.compute_share.is_finite() && mc.compute_share > 0.0) {
                return bad(format!("miner {} needs a positive compute_share", mc.id));
            }
            if mc.learning_rate.is_some_and(|lr| !(lr.is_finite() && lr > 0.0)) {
                return bad(format!("miner {} has a bad learning_rate", mc.id));
            }
            total += mc.compute_share;
        }
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("compute shares sum to {total}, expected 1"));
        }
        Ok(())
    }
}
