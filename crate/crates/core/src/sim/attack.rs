//! Adversarial scenarios built on top of [`run_scenario`].

use std::collections::BTreeMap;

use serde::Serialize;

use super::{build_miners, run_scenario, MinerConfig, ScenarioConfig, SimError};
use crate::actors::{FullNodeActor, RoundContext, Strategy};
use crate::chain::{Block, ChainStore};
use crate::consensus::{ChainChoice, ConsensusError};
use crate::dl::{evaluate, Accuracy, Dataset, Model, TrainingLineage};

pub const ATTACKER_ID: &str = "attacker";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackOutcome {
    /// Honest nodes switched to the attacker's fork.
    Replace,
    /// The fork was offered and lost the fork-choice comparison.
    KeepCurrent,
    /// Non-colluding nodes refused to revisit a final height.
    RejectedFinalized,
    /// Nothing to attack: the honest run produced no blocks.
    NoHonestChain,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HeightGap {
    pub height: u64,
    pub honest: Option<Accuracy>,
    pub attacker: Accuracy,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DoubleSpendReport {
    pub seed: u64,
    pub attacker_share: f64,
    pub colluding_full_nodes: bool,
    pub honest_len: usize,
    pub fork_len: usize,
    pub outcome: AttackOutcome,
    /// The fork beat the honest block at every contested height.
    pub dominated_every_height: bool,
    pub gaps: Vec<HeightGap>,
}

/// Splits the base miners' shares over `1 - share` and adds a private
/// attacker with `share`.
fn with_attacker(base: &ScenarioConfig, share: f64, rounds: u64) -> ScenarioConfig {
    let mut cfg = base.clone();
    cfg.rounds = rounds;
    for m in &mut cfg.miners {
        m.compute_share *= 1.0 - share;
    }
    cfg.miners.push(MinerConfig::new(ATTACKER_ID, Strategy::Private, share));
    cfg
}

/// Runs the public chain with the attacker silent, lets the attacker mine a
/// private fork from the first block with its own share of the budget (one
/// height longer than the public chain), then offers the fork to an honest
/// node. A non-colluding node treats every held height as final; a colluding
/// one applies the configured fork-choice rule.
pub fn double_spend_scenario(
    base: &ScenarioConfig,
    attacker_share: f64,
    rounds: u64,
    colluding_full_nodes: bool,
) -> Result<DoubleSpendReport, SimError> {
    if !(0.0 < attacker_share && attacker_share < 1.0) {
        return Err(SimError::Config(format!("attacker share {attacker_share} must be in (0, 1)")));
    }
    let cfg = with_attacker(base, attacker_share, rounds);
    let run = run_scenario(&cfg)?;
    let mut report = DoubleSpendReport {
        seed: cfg.seed,
        attacker_share,
        colluding_full_nodes,
        honest_len: run.store.len(),
        fork_len: 0,
        outcome: AttackOutcome::NoHonestChain,
        dominated_every_height: false,
        gaps: Vec::new(),
    };
    let honest_len = run.store.len();
    if honest_len == 0 {
        return Ok(report);
    }

    let attacker = build_miners(&cfg).pop().expect("attacker appended last");
    let mut slots: Vec<usize> = run.test_slot_by_height.clone();
    let next = slots.last().map_or(0, |s| s + 1);
    if next >= run.requester.slots() {
        return Err(SimError::Config("double-spend scenario needs at least one extra test set".into()));
    }
    slots.push(next);

    let mut fork = ChainStore::new();
    let genesis = run.store.get(0).expect("non-empty chain").clone();
    let mut tip: (Model, TrainingLineage) = tip_of(&genesis)?;
    fork.append(genesis)?;
    for height in 1..=honest_len as u64 {
        let test = run.requester.schedule().get(slots[height as usize]).expect("slot exists");
        let ctx = RoundContext {
            round: height,
            height,
            prev_hash: fork.tip_hash(),
            tip: Some((&tip.0, &tip.1)),
            train_set: run.train_set(),
            epoch_budget: cfg.epoch_budget,
            now: 0,
            claim_mode: cfg.round.claim_mode,
            master_seed: cfg.seed,
        };
        let Some(p) = attacker.train_round(&ctx)? else {
            break;
        };
        let score = evaluate(&p.model, test)?;
        let mut block = p.block;
        if block.header.claimed_accuracy.is_some() {
            block.header.claimed_accuracy = Some(score);
        } else {
            block.revealed_accuracy = Some(score);
        }
        let lineage = block.training.clone().expect("lineage set");
        report.gaps.push(HeightGap {
            height,
            honest: run.store.get(height).and_then(Block::claimed_accuracy),
            attacker: score,
        });
        fork.append(block)?;
        tip = (p.model, lineage);
    }
    report.fork_len = fork.len();
    report.dominated_every_height =
        !report.gaps.is_empty() && report.gaps.iter().all(|g| g.honest.is_none_or(|h| g.attacker > h));

    let mut node = FullNodeActor::new("victim", cfg.round.clone(), !colluding_full_nodes);
    node.store = run.store.clone();
    report.outcome = if colluding_full_nodes {
        let tests: BTreeMap<u64, &Dataset> = slots
            .iter()
            .enumerate()
            .filter_map(|(h, &s)| Some((h as u64, run.requester.schedule().get(s)?)))
            .collect();
        match node.consider_chain(&fork, run.train_set(), &tests, cfg.fork_rule)? {
            ChainChoice::Replace => AttackOutcome::Replace,
            ChainChoice::KeepCurrent => AttackOutcome::KeepCurrent,
        }
    } else {
        match fork.get(1).cloned().map(|b| node.offer_block(b)) {
            Some(Err(ConsensusError::Finalized { .. })) | None => AttackOutcome::RejectedFinalized,
            Some(Err(e)) => return Err(e.into()),
            Some(Ok(())) => return Err(SimError::Invariant("a final height accepted a second block".into())),
        }
    };
    Ok(report)
}

fn tip_of(block: &Block) -> Result<(Model, TrainingLineage), SimError> {
    let model = block
        .model
        .as_ref()
        .ok_or_else(|| SimError::Invariant(format!("block {} has no model", block.height())))?
        .decode()?;
    let lineage = block
        .training
        .clone()
        .ok_or_else(|| SimError::Invariant(format!("block {} has no lineage", block.height())))?;
    Ok((model, lineage))
}

/// Fraction of accepted blocks won by a focal honest miner with
/// `focal_share`, competing against three honest miners splitting the rest,
/// pooled over `seeds`.
pub fn win_frequency(base: &ScenarioConfig, focal_share: f64, seeds: &[u64]) -> Result<f64, SimError> {
    let mut cfg = base.clone();
    let rest = (1.0 - focal_share) / 3.0;
    cfg.miners = vec![MinerConfig::new("focal", Strategy::Honest, focal_share)];
    cfg.miners.extend((0..3).map(|i| MinerConfig::new(format!("other-{i}"), Strategy::Honest, rest)));
    let (mut wins, mut blocks) = (0u64, 0u64);
    for &seed in seeds {
        cfg.seed = seed;
        let run = run_scenario(&cfg)?;
        blocks += run.blocks.len() as u64;
        wins += run.blocks.iter().filter(|b| b.winner == "focal").count() as u64;
    }
    Ok(if blocks == 0 { 0.0 } else { wins as f64 / blocks as f64 })
}

fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties. `None` when the
/// lengths differ, there are fewer than two points, or either side is
/// constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}
