use serde::{Deserialize, Serialize};

use super::ActorError;
use crate::chain::{make_block, Block, BlockHeader, BlockTemplate, Digest, MinerId, Transaction};
use crate::consensus::{ClaimMode, Submission};
use crate::dl::rng::DetRng;
use crate::dl::{evaluate, init_weights, train_on, Accuracy, Dataset, Model, TrainingLineage, TrainingParams, TrainingSegment};

pub const BLOCK_REWARD: u64 = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    Honest,
    /// Resubmits the first model it sees in Phase 2 under its own name. With
    /// `commit_own` it also trains and commits a header of its own, which
    /// cannot match the stolen model.
    Thief {
        #[serde(default = "yes")]
        commit_own: bool,
    },
    /// Commits honestly, then keeps training on the released test set
    /// (doubling the rate after each chunk that does not beat the committed
    /// model) and submits the best result instead.
    Overfitter {
        #[serde(default = "overfit_lr_scale")]
        lr_scale: f64,
        #[serde(default = "overfit_chunk")]
        chunk_epochs: u32,
        #[serde(default = "overfit_chunks")]
        max_chunks: u32,
    },
    /// Commits honestly, then claims a perfect score.
    Inflator,
    /// Holds compute share but never talks to the public network (a
    /// private-fork attacker).
    Private,
}

fn yes() -> bool {
    true
}
fn overfit_lr_scale() -> f64 {
    10.0
}
fn overfit_chunk() -> u32 {
    10
}
fn overfit_chunks() -> u32 {
    20
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Honest => "honest",
            Strategy::Thief { .. } => "thief",
            Strategy::Overfitter { .. } => "overfitter",
            Strategy::Inflator => "inflator",
            Strategy::Private => "private",
        }
    }

    pub fn overfitter() -> Self {
        Strategy::Overfitter { lr_scale: overfit_lr_scale(), chunk_epochs: overfit_chunk(), max_chunks: overfit_chunks() }
    }

    fn trains_in_public(&self) -> bool {
        !matches!(self, Strategy::Thief { commit_own: false } | Strategy::Private)
    }
}

/// What a miner needs to know at commitment time.
#[derive(Clone, Copy, Debug)]
pub struct RoundContext<'a> {
    pub round: u64,
    pub height: u64,
    pub prev_hash: Digest,
    /// Accepted tip model and its lineage; `None` before the first block.
    pub tip: Option<(&'a Model, &'a TrainingLineage)>,
    pub train_set: &'a Dataset,
    pub epoch_budget: u32,
    pub now: u64,
    pub claim_mode: ClaimMode,
    pub master_seed: u64,
}

/// A block committed in Phase 1 and waiting for the test set.
#[derive(Clone, Debug)]
pub struct PendingBlock {
    pub block: Block,
    pub model: Model,
    pub held_out: Option<Accuracy>,
    pub epochs_run: u32,
    pub epochs_kept: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct OverfitReport {
    pub committed: Accuracy,
    pub overfit: Accuracy,
}

#[derive(Clone, Debug)]
pub struct MinerActor {
    pub id: MinerId,
    pub strategy: Strategy,
    /// Fraction of the network's per-round epoch budget this miner runs.
    pub compute_share: f64,
    /// Architecture, base learning rate and init seed for a fresh start.
    pub params: TrainingParams,
    /// Per-round learning rate is `base * (1 + lr_jitter * (2u - 1))`.
    pub lr_jitter: f64,
    pub checkpoints: u32,
    pub held_out_percent: u32,
    pending: Option<PendingBlock>,
    pub last_overfit: Option<OverfitReport>,
}

impl MinerActor {
    pub fn new(id: MinerId, strategy: Strategy, compute_share: f64, params: TrainingParams) -> Self {
        MinerActor {
            id,
            strategy,
            compute_share,
            params,
            lr_jitter: 0.2,
            checkpoints: 4,
            held_out_percent: 10,
            pending: None,
            last_overfit: None,
        }
    }

    pub fn epochs_for(&self, budget: u32) -> u32 {
        (budget as f64 * self.compute_share).round() as u32
    }

    pub fn learning_rate_for(&self, round: u64, master_seed: u64) -> f64 {
        let mut rng = DetRng::new(&format!("podl/lr/{}", self.id), master_seed, round);
        let u = rng.next_f64();
        self.params.learning_rate * (1.0 + self.lr_jitter * (2.0 * u - 1.0))
    }

    pub fn pending(&self) -> Option<&PendingBlock> {
        self.pending.as_ref()
    }

    fn transactions(&self, height: u64, round: u64) -> Vec<Transaction> {
        vec![
            Transaction::coinbase(BLOCK_REWARD, self.id.0.as_bytes()),
            Transaction::transfer(format!("{}/{height}/{round}", self.id).into_bytes()),
        ]
    }

    fn block_for(
        &self,
        ctx: &RoundContext<'_>,
        model: &Model,
        training: TrainingLineage,
        header_claim: Option<Accuracy>,
    ) -> Result<Block, ActorError> {
        Ok(make_block(BlockTemplate {
            height: ctx.height,
            prev_header_hash: ctx.prev_hash,
            transactions: self.transactions(ctx.height, ctx.round),
            model,
            training: Some(training),
            claimed_accuracy: header_claim,
            miner_id: self.id.clone(),
            now: ctx.now,
        })?)
    }

    /// Trains from the accepted tip (or a fresh init before the first block)
    /// for this miner's share of the budget, keeps the checkpoint that scores
    /// best on the held-out tail of the training set, and returns the header
    /// to commit. `None` when the strategy does not train or the share rounds
    /// to zero epochs.
    pub fn phase1(&mut self, ctx: &RoundContext<'_>) -> Result<Option<BlockHeader>, ActorError> {
        self.pending = None;
        self.last_overfit = None;
        if !self.strategy.trains_in_public() {
            return Ok(None);
        }
        let Some(p) = self.train_round(ctx)? else {
            return Ok(None);
        };
        let header_claim = match ctx.claim_mode {
            ClaimMode::RevealTime => None,
            ClaimMode::InHeader if self.strategy == Strategy::Inflator => Some(Accuracy::ONE),
            // The only estimate available before the test set exists.
            ClaimMode::InHeader => p.held_out.or(Some(Accuracy::ZERO)),
        };
        let block = self.block_for(ctx, &p.model, p.block.training.clone().expect("lineage set"), header_claim)?;
        let header = block.header.clone();
        self.pending = Some(PendingBlock { block, ..p });
        Ok(Some(header))
    }

    /// The training part of [`MinerActor::phase1`]; also used for private forks.
    pub fn train_round(&self, ctx: &RoundContext<'_>) -> Result<Option<PendingBlock>, ActorError> {
        let epochs = self.epochs_for(ctx.epoch_budget);
        if epochs == 0 {
            return Ok(None);
        }
        let (mut model, parent, start_hash) = match ctx.tip {
            Some((m, l)) => (m.clone(), l.clone(), Some(m.hash()?)),
            None => {
                let n = ctx.train_set.len();
                let held = n * self.held_out_percent as usize / 100;
                let fit = (n - held).max(1);
                (init_weights(&self.params)?, TrainingLineage::fresh(self.params.layer_sizes.clone(), self.params.init_seed, fit), None)
            }
        };
        let fit_n = parent.train_records.min(ctx.train_set.len());
        let records = &ctx.train_set.records()[..fit_n];
        let held_out = if fit_n < ctx.train_set.len() { Some(ctx.train_set.suffix_from(fit_n)?) } else { None };
        let lr = self.learning_rate_for(ctx.round, ctx.master_seed);

        let chunks = self.checkpoints.clamp(1, epochs);
        let mut best: Option<(Option<Accuracy>, u32, Model)> = None;
        let mut done = 0;
        for c in 0..chunks {
            let step = if c + 1 == chunks { epochs - done } else { epochs / chunks };
            train_on(&mut model, records, lr, step)?;
            done += step;
            let score = held_out.as_ref().map(|h| evaluate(&model, h)).transpose()?;
            if best.as_ref().is_none_or(|(s, _, _)| score >= *s) {
                best = Some((score, done, model.clone()));
            }
        }
        let (held, kept, model) = best.expect("at least one checkpoint");
        let lineage = parent.extended(TrainingSegment { learning_rate: lr, epochs: kept }, start_hash);
        let block = self.block_for(ctx, &model, lineage, None)?;
        Ok(Some(PendingBlock { block, model, held_out: held, epochs_run: epochs, epochs_kept: kept }))
    }

    /// Reveals after the test set is out. Honest miners claim their exact
    /// score; overfitters and inflators deviate as described on
    /// [`Strategy`]. Thieves and private miners return `None` here (see
    /// [`MinerActor::steal`]).
    pub fn phase2(&mut self, ctx: &RoundContext<'_>, test_set: &Dataset) -> Result<Option<Submission>, ActorError> {
        let Some(p) = self.pending.take() else {
            return Ok(None);
        };
        let sub = |block: Block| Submission { block, arrival_time: ctx.now, submitter: self.id.clone() };
        match self.strategy.clone() {
            Strategy::Honest => {
                let mut block = p.block;
                if block.header.claimed_accuracy.is_none() {
                    block.revealed_accuracy = Some(evaluate(&p.model, test_set)?);
                }
                Ok(Some(sub(block)))
            }
            Strategy::Inflator => {
                let truth = evaluate(&p.model, test_set)?;
                if truth.correct() == truth.total() {
                    return Ok(None);
                }
                let mut block = p.block;
                if block.header.claimed_accuracy.is_none() {
                    block.revealed_accuracy = Some(Accuracy::new(truth.total(), truth.total())?);
                }
                Ok(Some(sub(block)))
            }
            Strategy::Overfitter { lr_scale, chunk_epochs, max_chunks } => {
                let committed = evaluate(&p.model, test_set)?;
                let mut lr = self.learning_rate_for(ctx.round, ctx.master_seed) * lr_scale;
                let mut model = p.model.clone();
                let (mut best, mut score) = (None, committed);
                for _ in 0..max_chunks.max(1) {
                    if train_on(&mut model, test_set.records(), lr, chunk_epochs.max(1)).is_err() {
                        model = best.clone().unwrap_or_else(|| p.model.clone());
                        lr /= 4.0;
                        continue;
                    }
                    let s = evaluate(&model, test_set)?;
                    if best.is_none() || s > score {
                        (best, score) = (Some(model.clone()), s);
                    }
                    if score > committed {
                        break;
                    }
                    lr *= 2.0;
                }
                let model = best.unwrap_or(model);
                self.last_overfit = Some(OverfitReport { committed, overfit: score });
                let lineage = p.block.training.clone().expect("lineage set");
                let claim_in_header = ctx.claim_mode == ClaimMode::InHeader;
                let mut block = self.block_for(ctx, &model, lineage, claim_in_header.then_some(score))?;
                block.header.created_at = p.block.header.created_at;
                if !claim_in_header {
                    block.revealed_accuracy = Some(score);
                }
                Ok(Some(sub(block)))
            }
            Strategy::Thief { .. } | Strategy::Private => Ok(None),
        }
    }

    /// A thief's copy of someone else's reveal: same model, lineage and
    /// claim, in a block under the thief's name.
    pub fn steal(&self, ctx: &RoundContext<'_>, observed: &Submission) -> Result<Option<Submission>, ActorError> {
        if !matches!(self.strategy, Strategy::Thief { .. }) {
            return Ok(None);
        }
        let (Some(blob), Some(lineage), Some(claim)) =
            (observed.block.model.as_ref(), observed.block.training.clone(), observed.block.claimed_accuracy())
        else {
            return Ok(None);
        };
        let model = blob.decode()?;
        let in_header = ctx.claim_mode == ClaimMode::InHeader;
        let mut block = self.block_for(ctx, &model, lineage, in_header.then_some(claim))?;
        if !in_header {
            block.revealed_accuracy = Some(claim);
        }
        Ok(Some(Submission { block, arrival_time: ctx.now, submitter: self.id.clone() }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consensus::{accept_block, CommitmentLog, Outcome, SkipReason};
    use crate::dl::generate_task;

    fn setup() -> (Dataset, Vec<Dataset>) {
        generate_task(4, 90, 45, 3).unwrap()
    }

    fn miner(id: &str, strategy: Strategy, share: f64) -> MinerActor {
        MinerActor::new(MinerId::new(id), strategy, share, TrainingParams::new(vec![2, 6, 3], 0.01, 0, 5))
    }

    fn ctx<'a>(train: &'a Dataset, tip: Option<(&'a Model, &'a TrainingLineage)>, budget: u32) -> RoundContext<'a> {
        RoundContext {
            round: 0,
            height: 0,
            prev_hash: Digest::ZERO,
            tip,
            train_set: train,
            epoch_budget: budget,
            now: 10,
            claim_mode: ClaimMode::RevealTime,
            master_seed: 1,
        }
    }

    #[test]
    fn share_sets_epochs() {
        let m = miner("a", Strategy::Honest, 0.5);
        assert_eq!(m.epochs_for(400), 200);
        let (train, _) = setup();
        let p = m.train_round(&ctx(&train, None, 40)).unwrap().unwrap();
        assert_eq!(p.epochs_run, 20);
        assert!(p.epochs_kept > 0 && p.epochs_kept <= 20);
        assert_eq!(p.block.training.as_ref().unwrap().total_epochs(), p.epochs_kept as u64);
    }

    #[test]
    fn header_binds_revealed_model_and_claim_is_exact() {
        let (train, tests) = setup();
        let mut m = miner("a", Strategy::Honest, 1.0);
        let c = ctx(&train, None, 8);
        let header = m.phase1(&c).unwrap().unwrap();
        let sub = m.phase2(&c, &tests[0]).unwrap().unwrap();
        assert_eq!(sub.block.header, header);
        assert_eq!(sub.block.model.as_ref().unwrap().hash(), header.model_hash);
        let model = sub.block.model.as_ref().unwrap().decode().unwrap();
        assert_eq!(sub.block.claimed_accuracy(), Some(evaluate(&model, &tests[0]).unwrap()));
    }

    #[test]
    fn second_round_starts_from_first_round_model() {
        let (train, _) = setup();
        let m = miner("a", Strategy::Honest, 1.0);
        let p0 = m.train_round(&ctx(&train, None, 8)).unwrap().unwrap();
        let lineage0 = p0.block.training.clone().unwrap();
        let mut c1 = ctx(&train, Some((&p0.model, &lineage0)), 8);
        c1.round = 1;
        c1.height = 1;
        let p1 = m.train_round(&c1).unwrap().unwrap();
        let lineage1 = p1.block.training.as_ref().unwrap();
        assert_eq!(lineage1.start_model, Some(p0.model.hash().unwrap()));
        assert_eq!(lineage1.replay_last_from(&p0.model, &train).unwrap(), p1.model);
        assert_eq!(lineage1.replay(&train).unwrap(), p1.model);
    }

    /// Full round with one honest miner and each adversary; only the honest
    /// block can be accepted.
    #[test]
    fn adversaries_lose() {
        let (train, tests) = setup();
        let c = ctx(&train, None, 12);
        let mut honest = miner("honest", Strategy::Honest, 0.25);
        let mut thief = miner("thief", Strategy::Thief { commit_own: true }, 0.25);
        let mut over = miner("over", Strategy::overfitter(), 0.25);
        let mut infl = miner("infl", Strategy::Inflator, 0.25);
        let mut log = CommitmentLog::new(1);
        log.open_window(0, 0, 100);
        for m in [&mut honest, &mut thief, &mut over, &mut infl] {
            let h = m.phase1(&c).unwrap().unwrap();
            log.commit_header(0, h, 10).unwrap();
        }
        let mut subs = vec![honest.phase2(&c, &tests[0]).unwrap().unwrap()];
        assert!(thief.phase2(&c, &tests[0]).unwrap().is_none());
        subs.push(thief.steal(&c, &subs[0]).unwrap().unwrap());
        subs.push(over.phase2(&c, &tests[0]).unwrap().unwrap());
        let inflated = infl.phase2(&c, &tests[0]).unwrap();
        let infl_present = inflated.is_some();
        subs.extend(inflated);
        let report = over.last_overfit.unwrap();
        assert!(report.overfit > report.committed || report.committed.correct() == report.committed.total());

        let d = accept_block(&log, 0, &subs, &tests[0], None, 1 << 20);
        match &d.outcome {
            Outcome::Accepted { winner, .. } => assert_eq!(winner.0, "honest"),
            other => panic!("{other:?}"),
        }
        let reason_of = |who: &str| d.skipped.iter().find(|s| s.submitter.0 == who).map(|s| s.reason.clone());
        if let Some(r) = reason_of("thief") {
            assert_eq!(r, SkipReason::NotCommitted);
        }
        if let Some(r) = reason_of("over") {
            assert_eq!(r, SkipReason::NotCommitted);
        }
        if infl_present {
            assert!(matches!(reason_of("infl"), Some(SkipReason::AccuracyMismatch { .. })));
        }
    }

    #[test]
    fn thief_without_header_and_private_stay_silent() {
        let (train, _) = setup();
        let c = ctx(&train, None, 8);
        assert!(miner("t", Strategy::Thief { commit_own: false }, 0.5).phase1(&c).unwrap().is_none());
        assert!(miner("p", Strategy::Private, 0.5).phase1(&c).unwrap().is_none());
        assert!(miner("z", Strategy::Honest, 0.01).phase1(&c).unwrap().is_none());
    }
}
