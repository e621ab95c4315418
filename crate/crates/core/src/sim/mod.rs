//! Scenario engine: drives the requester, miners and full nodes through
//! rounds on the discrete-event scheduler and records the trace, per-block
//! metrics and a run summary.
//!
//! Round `r` starts at `T`. Phase 1 spans `[T, T + d1)`; miners spend the
//! first `miner_overhead_ms` on overhead, train until `T + d1 - commit_lead`
//! and commit then. The test set is released at `T + d1` and Phase 2 spans
//! `[T + d1, T + d1 + d2)`. With pipelining the next round starts at
//! `T + d1`, otherwise at `T + d1 + d2`. The height a round works on is
//! fixed when the previous round's Phase 2 closes, so the commitment window
//! for round `r + 1` is opened then, covering `[T', T' + d1 - 1]`.

mod attack;
mod config;
mod metrics;

use std::collections::BTreeMap;
use std::time::Instant;

use num_rational::Ratio;

pub use attack::{double_spend_scenario, spearman, win_frequency, AttackOutcome, DoubleSpendReport, HeightGap, ATTACKER_ID};
pub use config::{MinerConfig, ModelConfig, RequesterConfig, ScenarioConfig, TimingConfig};
pub use metrics::{BlockMetrics, OverfitRecord, RoundRecord, RoundTiming, Summary};

use crate::actors::{ActorError, FullNodeActor, MinerActor, ModelRequester, RequesterAction, RoundContext, Strategy};
use crate::chain::{prune_models, BlockHeader, ChainDump, ChainError, ChainStore, Digest, MinerId};
use crate::consensus::{ConsensusError, Outcome, SkipReason, Submission};
use crate::dl::rng::DetRng;
use crate::dl::{Dataset, DlError, Model, TrainingLineage, TrainingParams};
use crate::netsim::{recycling_ratio, DelaySampler, NetsimError, Scheduler, SimTime, TraceKind, TraceRecord};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("config: {0}")]
    Config(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Actor(#[from] ActorError),
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
    #[error(transparent)]
    Netsim(#[from] NetsimError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Model(#[from] DlError),
}

#[derive(Clone, Debug)]
enum Ev {
    RoundStart(u64),
    Commit(u64),
    Phase1End(u64),
    Release(u64),
    Phase2End(u64),
    DeliverCommit { node: usize, round: u64, sender: usize, header: Box<BlockHeader> },
    DeliverSub { node: usize, round: u64, sub: Box<Submission> },
}

/// Everything a finished run produced.
pub struct SimOutcome {
    pub config: ScenarioConfig,
    /// The chain as seen by full node 0.
    pub store: ChainStore,
    pub trace: Vec<TraceRecord>,
    pub blocks: Vec<BlockMetrics>,
    pub rounds: Vec<RoundRecord>,
    pub summary: Summary,
    pub timings: Vec<RoundTiming>,
    pub requester: ModelRequester,
    /// Test-set slot each height was validated against.
    pub test_slot_by_height: Vec<usize>,
}

impl SimOutcome {
    pub fn train_set(&self) -> &Dataset {
        self.requester.train_set()
    }

    pub fn test_set_for_height(&self, height: u64) -> Option<&Dataset> {
        let slot = *self.test_slot_by_height.get(height as usize)?;
        self.requester.schedule().get(slot)
    }

    pub fn test_map(&self) -> BTreeMap<u64, &Dataset> {
        (0..self.store.len() as u64).filter_map(|h| Some((h, self.test_set_for_height(h)?))).collect()
    }

    pub fn dump(&self) -> Result<ChainDump, ChainError> {
        let ids: Vec<Digest> = (0..self.store.len() as u64)
            .map(|h| self.test_set_for_height(h).map(Dataset::id).unwrap_or(Digest::ZERO))
            .collect();
        ChainDump::new(&self.store, self.train_set().id(), &ids)
    }

    pub fn accepted_accuracies(&self) -> Vec<crate::dl::Accuracy> {
        self.store.blocks().iter().filter_map(|b| b.claimed_accuracy()).collect()
    }
}

struct Engine {
    cfg: ScenarioConfig,
    sched: Scheduler<Ev>,
    delays: DelaySampler,
    requester: ModelRequester,
    miners: Vec<MinerActor>,
    nodes: Vec<FullNodeActor>,
    trace: Vec<TraceRecord>,
    blocks: Vec<BlockMetrics>,
    rounds: Vec<RoundRecord>,
    timings: Vec<RoundTiming>,
    overfits: Vec<OverfitRecord>,
    test_slot_by_height: Vec<usize>,
    tip: Option<(Model, TrainingLineage)>,
    round_start: BTreeMap<u64, SimTime>,
    round_wall: BTreeMap<u64, Instant>,
    stopped: bool,
    last_time: SimTime,
}

fn miner_init_seed(master: u64, idx: usize) -> u64 {
    DetRng::new("podl/miner-init", master, idx as u64).next_u64()
}

/// Builds the miners of a scenario (also used by the attack scenarios).
pub fn build_miners(cfg: &ScenarioConfig) -> Vec<MinerActor> {
    cfg.miners
        .iter()
        .enumerate()
        .map(|(i, mc)| {
            let lr = mc.learning_rate.unwrap_or(cfg.model.learning_rate);
            let params = TrainingParams::new(cfg.layer_sizes(), lr, 0, miner_init_seed(cfg.seed, i));
            let mut m = MinerActor::new(MinerId::new(mc.id.clone()), mc.strategy.clone(), mc.compute_share, params);
            m.lr_jitter = cfg.model.lr_jitter;
            m.checkpoints = cfg.model.checkpoints;
            m.held_out_percent = cfg.model.held_out_percent;
            m
        })
        .collect()
}

pub fn build_requester(cfg: &ScenarioConfig) -> Result<ModelRequester, SimError> {
    let r = &cfg.requester;
    let slots = cfg.rounds as usize + r.extra_test_sets;
    Ok(ModelRequester::new(
        cfg.task_seed(),
        &r.task,
        r.n_train,
        r.n_test_per_block,
        slots,
        r.stop_window,
        Ratio::new(r.stop_epsilon.0 as u128, r.stop_epsilon.1 as u128),
    )?)
}

/// Runs a scenario to completion.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<SimOutcome, SimError> {
    let run = run_scenario_partial(cfg)?;
    match run.error {
        Some(e) => Err(e),
        None => Ok(run.outcome),
    }
}

/// A run that may have stopped early; `outcome` holds everything recorded up
/// to the failure.
pub struct PartialRun {
    pub outcome: SimOutcome,
    pub error: Option<SimError>,
}

/// Like [`run_scenario`], but a failure after setup still returns what was
/// recorded so far. Only config and setup problems are errors here.
pub fn run_scenario_partial(cfg: &ScenarioConfig) -> Result<PartialRun, SimError> {
    cfg.validate()?;
    let requester = build_requester(cfg)?;
    let nodes = (0..cfg.full_nodes).map(|i| FullNodeActor::new(format!("node-{i}"), cfg.round.clone(), true)).collect();
    let mut e = Engine {
        cfg: cfg.clone(),
        sched: Scheduler::new(),
        delays: cfg.timing.delay.sampler(cfg.seed)?,
        requester,
        miners: build_miners(cfg),
        nodes,
        trace: Vec::new(),
        blocks: Vec::new(),
        rounds: Vec::new(),
        timings: Vec::new(),
        overfits: Vec::new(),
        test_slot_by_height: Vec::new(),
        tip: None,
        round_start: BTreeMap::new(),
        round_wall: BTreeMap::new(),
        stopped: false,
        last_time: 0,
    };
    e.sched.schedule_at(0, Ev::RoundStart(0))?;
    let error = e.run().err();
    Ok(PartialRun { outcome: e.finish(), error })
}

impl Engine {
    fn run(&mut self) -> Result<(), SimError> {
        while let Some(ev) = self.sched.pop() {
            if ev.fire_at < self.last_time {
                return Err(SimError::Invariant(format!("clock went back from {} to {}", self.last_time, ev.fire_at)));
            }
            self.last_time = ev.fire_at;
            self.handle(ev.payload)?;
        }
        Ok(())
    }

    fn now(&self) -> SimTime {
        self.sched.now()
    }

    fn height(&self) -> u64 {
        self.nodes[0].store.next_height()
    }

    fn record(&mut self, kind: TraceKind, sender: &str, receiver: &str, round: u64, digest: Option<Digest>) {
        let height = self.height();
        self.trace.push(TraceRecord {
            time: self.now(),
            kind,
            sender: sender.into(),
            receiver: receiver.into(),
            round,
            height,
            payload_digest: digest,
            end: None,
        });
    }

    fn span(&mut self, kind: TraceKind, who: &str, round: u64, start: SimTime, end: SimTime) {
        let height = self.height();
        self.trace.push(TraceRecord {
            time: start,
            kind,
            sender: who.into(),
            receiver: String::new(),
            round,
            height,
            payload_digest: None,
            end: Some(end),
        });
    }

    fn handle(&mut self, ev: Ev) -> Result<(), SimError> {
        if self.stopped {
            return Ok(());
        }
        match ev {
            Ev::RoundStart(r) => self.round_start(r),
            Ev::Commit(r) => self.commit(r),
            Ev::Phase1End(r) => {
                self.record(TraceKind::Phase1End, "clock", "", r, None);
                Ok(())
            }
            Ev::Release(r) => self.release(r),
            Ev::Phase2End(r) => self.phase2_end(r),
            Ev::DeliverCommit { node, round, sender, header } => {
                let now = self.now();
                let digest = header.hash();
                let sender_id = self.miners[sender].id.0.clone();
                let node_id = self.nodes[node].node_id.clone();
                let kind = match self.nodes[node].on_commit(*header, now) {
                    Ok(_) => TraceKind::HeaderCommit,
                    Err(_) => TraceKind::CommitRejected,
                };
                self.record(kind, &sender_id, &node_id, round, Some(digest));
                Ok(())
            }
            Ev::DeliverSub { node, round, sub } => {
                let end = self.round_start[&round] + self.cfg.round.phase1_ms + self.cfg.round.phase2_ms;
                let node_id = self.nodes[node].node_id.clone();
                let digest = sub.block.hash();
                let sender = sub.submitter.0.clone();
                if self.now() >= end {
                    self.record(TraceKind::LateSubmission, &sender, &node_id, round, Some(digest));
                } else {
                    self.nodes[node].on_submission(*sub);
                    self.record(TraceKind::Submission, &sender, &node_id, round, Some(digest));
                }
                Ok(())
            }
        }
    }

    fn round_start(&mut self, r: u64) -> Result<(), SimError> {
        let t = self.now();
        let (d1, d2) = (self.cfg.round.phase1_ms, self.cfg.round.phase2_ms);
        self.round_start.insert(r, t);
        self.round_wall.insert(r, Instant::now());
        self.record(TraceKind::Phase1Start, "clock", "", r, None);
        if r == 0 {
            for n in &mut self.nodes {
                n.open_phase1(0, t, t + d1 - 1);
            }
        }
        self.sched.schedule_at(t + d1 - self.cfg.timing.commit_lead_ms, Ev::Commit(r))?;
        self.sched.schedule_at(t + d1, Ev::Phase1End(r))?;
        self.sched.schedule_at(t + d1, Ev::Release(r))?;
        self.sched.schedule_at(t + d1 + d2, Ev::Phase2End(r))?;
        if self.cfg.round.pipeline_phases && r + 1 < self.cfg.rounds {
            self.sched.schedule_at(t + d1, Ev::RoundStart(r + 1))?;
        }
        Ok(())
    }

    fn context(&self) -> (u64, Digest) {
        (self.height(), self.nodes[0].store.tip_hash())
    }

    fn commit(&mut self, r: u64) -> Result<(), SimError> {
        let now = self.now();
        let t = self.round_start[&r];
        let (height, prev) = self.context();
        let overhead_end = t + self.cfg.timing.miner_overhead_ms;
        let mut headers = Vec::new();
        {
            let ctx = RoundContext {
                round: r,
                height,
                prev_hash: prev,
                tip: self.tip.as_ref().map(|(m, l)| (m, l)),
                train_set: self.requester.train_set(),
                epoch_budget: self.cfg.epoch_budget,
                now,
                claim_mode: self.cfg.round.claim_mode,
                master_seed: self.cfg.seed,
            };
            for (i, m) in self.miners.iter_mut().enumerate() {
                if let Some(h) = m.phase1(&ctx)? {
                    headers.push((i, h));
                }
            }
        }
        for (i, header) in headers {
            let id = self.miners[i].id.0.clone();
            self.span(TraceKind::ValidateSpan, &id, r, t, overhead_end);
            self.span(TraceKind::TrainSpan, &id, r, overhead_end, now);
            for node in 0..self.nodes.len() {
                let d = self.delays.sample();
                self.sched.schedule(d as i64, Ev::DeliverCommit { node, round: r, sender: i, header: Box::new(header.clone()) })?;
            }
        }
        Ok(())
    }

    fn send_submission(&mut self, r: u64, sub: Submission, sent_at: SimTime) -> Result<(), SimError> {
        for node in 0..self.nodes.len() {
            let at = sent_at + self.delays.sample();
            let mut s = sub.clone();
            s.arrival_time = at;
            self.sched.schedule_at(at, Ev::DeliverSub { node, round: r, sub: Box::new(s) })?;
        }
        Ok(())
    }

    fn release(&mut self, r: u64) -> Result<(), SimError> {
        let accepted: Vec<_> = self.nodes[0].store.blocks().iter().filter_map(|b| b.claimed_accuracy()).collect();
        let slot = r as usize;
        match self.requester.tick(slot, &accepted)? {
            RequesterAction::CollectModelAndStop => {
                self.record(TraceKind::RequesterStop, "requester", "", r, None);
                self.stopped = true;
                return Ok(());
            }
            RequesterAction::Continue => return Ok(()),
            RequesterAction::ReleaseTest(_) => {}
        }
        let now = self.now();
        let test_id = self.requester.test_set(slot)?.id();
        self.record(TraceKind::TestRelease, "requester", "*", r, Some(test_id));
        self.record(TraceKind::Phase2Start, "clock", "", r, None);
        let (height, prev) = self.context();
        let mut public = Vec::new();
        {
            let test = self.requester.test_set(slot)?;
            let ctx = RoundContext {
                round: r,
                height,
                prev_hash: prev,
                tip: None,
                train_set: self.requester.train_set(),
                epoch_budget: self.cfg.epoch_budget,
                now,
                claim_mode: self.cfg.round.claim_mode,
                master_seed: self.cfg.seed,
            };
            for (i, m) in self.miners.iter_mut().enumerate() {
                if let Some(sub) = m.phase2(&ctx, test)? {
                    if let Some(rep) = m.last_overfit {
                        self.overfits.push(OverfitRecord {
                            round: r,
                            miner: m.id.0.clone(),
                            committed: rep.committed,
                            overfit: rep.overfit,
                        });
                    }
                    public.push((i, sub));
                }
            }
        }
        // Thieves see each public reveal after one network delay and copy
        // the first one to reach them.
        let thieves: Vec<usize> =
            (0..self.miners.len()).filter(|&i| matches!(self.miners[i].strategy, Strategy::Thief { .. })).collect();
        let mut stolen = Vec::new();
        for &t in &thieves {
            let mut first: Option<(SimTime, usize)> = None;
            for (k, _) in public.iter().enumerate() {
                let seen = now + self.delays.sample();
                if first.is_none_or(|(s, _)| seen < s) {
                    first = Some((seen, k));
                }
            }
            if let Some((seen, k)) = first {
                let test_ctx = RoundContext {
                    round: r,
                    height,
                    prev_hash: prev,
                    tip: None,
                    train_set: self.requester.train_set(),
                    epoch_budget: self.cfg.epoch_budget,
                    now: seen,
                    claim_mode: self.cfg.round.claim_mode,
                    master_seed: self.cfg.seed,
                };
                if let Some(sub) = self.miners[t].steal(&test_ctx, &public[k].1)? {
                    stolen.push((seen, sub));
                }
            }
        }
        for (_, sub) in public {
            self.send_submission(r, sub, now)?;
        }
        for (seen, sub) in stolen {
            self.send_submission(r, sub, seen)?;
        }
        Ok(())
    }

    fn phase2_end(&mut self, r: u64) -> Result<(), SimError> {
        let now = self.now();
        let slot = r as usize;
        let t = self.round_start[&r];
        let height = self.height();
        if !self.requester.is_released(slot) {
            return Err(SimError::Invariant(format!("phase 2 of round {r} closed before its test set was released")));
        }
        let submissions = self.nodes[0].inbox_len();
        let mut decisions = Vec::with_capacity(self.nodes.len());
        let mut uncommitted = false;
        for i in 0..self.nodes.len() {
            let test = self.requester.test_set(slot)?;
            let d = self.nodes[i].close_phase2(test)?;
            if let Some(b) = d.accepted() {
                uncommitted |= !self.nodes[i].log.is_committed(b.height(), &b.hash());
            }
            decisions.push(d);
        }
        let disagreements = decisions.iter().skip(1).filter(|d| d.accepted().map(|b| b.hash()) != decisions[0].accepted().map(|b| b.hash())).count();
        let d = decisions.swap_remove(0);
        let mut record = RoundRecord::new(r, height, submissions, &d, disagreements as u64);
        record.uncommitted = uncommitted;
        match &d.outcome {
            Outcome::Accepted { header_hash, winner, accuracy, validations_performed, block, .. } => {
                self.record(TraceKind::Accepted, "node-0", "*", r, Some(*header_hash));
                let model = block.model.as_ref().expect("accepted blocks carry a model").decode()?;
                let lineage = block.training.clone().expect("accepted blocks carry a lineage");
                self.tip = Some((model, lineage));
                self.test_slot_by_height.push(slot);
                let strategy = self
                    .miners
                    .iter()
                    .find(|m| &m.id == winner)
                    .map(|m| m.strategy.name().to_string())
                    .unwrap_or_else(|| "unknown".into());
                record.winner_strategy = Some(strategy.clone());
                self.blocks.push(BlockMetrics {
                    height,
                    round: r,
                    winner: winner.0.clone(),
                    strategy,
                    claimed_accuracy: accuracy.to_string(),
                    accuracy: accuracy.as_f64(),
                    verified: true,
                    validations_performed: *validations_performed as u64,
                    submissions: submissions as u64,
                    skipped_not_committed: d.skipped.iter().filter(|s| s.reason == SkipReason::NotCommitted).count() as u64,
                    skipped_accuracy_mismatch: d
                        .skipped
                        .iter()
                        .filter(|s| matches!(s.reason, SkipReason::AccuracyMismatch { .. }))
                        .count() as u64,
                    epoch_budget: self.cfg.epoch_budget,
                    epochs_elapsed: (r + 1) * self.cfg.epoch_budget as u64,
                    header_hash: header_hash.to_hex(),
                    model_hash: block.header.model_hash.to_hex(),
                });
            }
            Outcome::RoundFailed { .. } => self.record(TraceKind::RoundFailed, "node-0", "*", r, None),
        }
        self.rounds.push(record);
        if let Some(k) = self.cfg.prune_keep {
            for n in &mut self.nodes {
                prune_models(&mut n.store, k)?;
            }
        }
        let window_end = t + self.cfg.round_window_ms();
        self.span(TraceKind::RoundClosed, "clock", r, t, window_end);
        self.record(TraceKind::Phase2End, "clock", "", r, None);
        if let Some(start) = self.round_wall.remove(&r) {
            self.timings.push(RoundTiming { round: r, wall_ms: start.elapsed().as_secs_f64() * 1e3 });
        }
        if r + 1 < self.cfg.rounds {
            let next_start = if self.cfg.round.pipeline_phases { t + self.cfg.round.phase1_ms } else { now };
            let h = self.height();
            let d1 = self.cfg.round.phase1_ms;
            for n in &mut self.nodes {
                n.open_phase1(h, next_start, next_start + d1 - 1);
            }
            if !self.cfg.round.pipeline_phases {
                self.sched.schedule_at(now, Ev::RoundStart(r + 1))?;
            }
        }
        Ok(())
    }

    fn finish(self) -> SimOutcome {
        let ratio = recycling_ratio(&self.trace);
        let summary = Summary::build(&self.rounds, &self.blocks, ratio, self.stopped, self.overfits);
        SimOutcome {
            config: self.cfg,
            store: self.nodes.into_iter().next().expect("one node").store,
            trace: self.trace,
            blocks: self.blocks,
            rounds: self.rounds,
            summary,
            timings: self.timings,
            requester: self.requester,
            test_slot_by_height: self.test_slot_by_height,
        }
    }
}
