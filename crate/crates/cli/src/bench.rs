//! `podl bench`: wall-clock microbenchmarks. The `reference` column holds
//! externally reported figures from different hardware, printed for context
//! only.

use std::hint::black_box;
use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use podl_core::chain::{make_block, BlockTemplate, MinerId, Transaction};
use podl_core::consensus::{accept_block, CommitmentLog, Submission};
use podl_core::dl::rng::DetRng;
use podl_core::dl::{generate_task_with, init_weights, TrainingParams};
use podl_core::hash_bytes;
use podl_core::sim::ScenarioConfig;

use crate::config::BenchConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum BenchKind {
    Hash,
    Sort,
    Hashtable,
    Validate,
    All,
}

/// One CSV row. `per_unit_ms` is the mean normalized to `unit`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub operation: String,
    pub size: u64,
    pub trials: usize,
    pub mean_ms: f64,
    pub stddev_ms: f64,
    pub min_ms: f64,
    pub per_unit_ms: f64,
    pub unit: String,
    pub reference: Option<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("validation bench setup: {0}")]
    Setup(String),
    #[error("output: {0}")]
    Io(String),
}

fn stats(samples: &[f64]) -> (f64, f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    (mean, var.sqrt(), min)
}

fn time_ms<T>(f: impl FnOnce() -> T) -> f64 {
    let t = Instant::now();
    black_box(f());
    t.elapsed().as_secs_f64() * 1e3
}

fn row(operation: &str, size: u64, samples: &[f64], per: f64, unit: &str, reference: Option<f64>) -> BenchRow {
    let (mean, sd, min) = stats(samples);
    BenchRow {
        operation: operation.into(),
        size,
        trials: samples.len(),
        mean_ms: mean,
        stddev_ms: sd,
        min_ms: min,
        per_unit_ms: mean / per,
        unit: unit.into(),
        reference,
    }
}

fn random_u64s(n: usize, stream: u64) -> Vec<u64> {
    let mut rng = DetRng::new("podl/bench", 0, stream);
    (0..n).map(|_| rng.next_u64()).collect()
}

pub fn bench_hash(cfg: &BenchConfig) -> Vec<BenchRow> {
    let bytes: Vec<u8> = random_u64s(cfg.hash_mb * (1 << 17), 1).iter().flat_map(|x| x.to_le_bytes()).collect();
    let samples: Vec<f64> = (0..cfg.trials).map(|_| time_ms(|| hash_bytes(&bytes))).collect();
    vec![row("sha256", bytes.len() as u64, &samples, cfg.hash_mb as f64, "ms/MB", Some(5.9))]
}

/// Sorts `n` and `2n` keys and adds a row with the ratio of the best times.
pub fn bench_sort(cfg: &BenchConfig) -> Vec<BenchRow> {
    let mut rows = Vec::new();
    let mut best = Vec::new();
    for (mult, reference) in [(1, Some(154.9)), (2, None)] {
        let n = cfg.sort_n * mult;
        let data = random_u64s(n, 2 + mult as u64);
        let samples: Vec<f64> = (0..cfg.trials)
            .map(|_| {
                let mut v = data.clone();
                time_ms(|| {
                    v.sort_unstable();
                    v
                })
            })
            .collect();
        let r = row("sort", n as u64, &samples, n as f64 / 1e6, "ms/1M", reference);
        best.push(r.min_ms);
        rows.push(r);
    }
    let ratio = best[1] / best[0];
    rows.push(BenchRow {
        operation: "sort_scaling".into(),
        size: (cfg.sort_n * 2) as u64,
        trials: cfg.trials,
        mean_ms: ratio,
        stddev_ms: 0.0,
        min_ms: ratio,
        per_unit_ms: ratio,
        unit: "ratio".into(),
        reference: None,
    });
    rows
}

/// Open addressing with linear probing over `ceil(n / load_factor)` slots.
pub struct ProbeTable {
    keys: Vec<u64>,
    values: Vec<u64>,
    used: Vec<bool>,
    len: usize,
}

fn mix(mut x: u64) -> u64 {
    x ^= x >> 33;
    x = x.wrapping_mul(0xff51_afd7_ed55_8ccd);
    x ^= x >> 33;
    x = x.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    x ^ (x >> 33)
}

impl ProbeTable {
    pub fn with_load_factor(n: usize, load_factor: f64) -> Self {
        let cap = ((n as f64 / load_factor).ceil() as usize).max(1);
        ProbeTable { keys: vec![0; cap], values: vec![0; cap], used: vec![false; cap], len: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.keys.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    /// The slot holding `key`, or the empty slot where it would go. `None`
    /// only when the table is full and lacks `key`.
    fn slot(&self, key: u64) -> Option<usize> {
        let cap = self.keys.len();
        let mut i = (mix(key) % cap as u64) as usize;
        for _ in 0..cap {
            if !self.used[i] || self.keys[i] == key {
                return Some(i);
            }
            i = if i + 1 == cap { 0 } else { i + 1 };
        }
        None
    }

    /// Panics when full; the benchmark sizes the table so that never happens.
    pub fn insert(&mut self, key: u64, value: u64) {
        let i = self.slot(key).expect("probe table is full");
        if !self.used[i] {
            self.used[i] = true;
            self.keys[i] = key;
            self.len += 1;
        }
        self.values[i] = value;
    }

    pub fn get(&self, key: u64) -> Option<u64> {
        let i = self.slot(key)?;
        self.used[i].then(|| self.values[i])
    }
}

pub fn bench_hashtable(cfg: &BenchConfig) -> Vec<BenchRow> {
    let keys = random_u64s(cfg.hashtable_n, 5);
    let mut inserts = Vec::new();
    let mut reads = Vec::new();
    for _ in 0..cfg.trials {
        let mut table = ProbeTable::with_load_factor(keys.len(), cfg.load_factor);
        inserts.push(time_ms(|| {
            for (i, &k) in keys.iter().enumerate() {
                table.insert(k, i as u64);
            }
        }));
        debug_assert!(table.len() as f64 <= table.capacity() as f64 * cfg.load_factor + 1.0);
        reads.push(time_ms(|| keys.iter().map(|&k| table.get(k).unwrap_or(0)).fold(0u64, u64::wrapping_add)));
    }
    let per = cfg.hashtable_n as f64 / 1e6;
    vec![
        row("hashtable_insert", cfg.hashtable_n as u64, &inserts, per, "ms/1M", Some(89.75)),
        row("hashtable_read", cfg.hashtable_n as u64, &reads, per, "ms/1M", Some(16.25)),
    ]
}

/// Times full-node validation of one committed submission (commitment
/// lookup, structure checks, model decode and test-set evaluation) with the
/// scenario's architecture and test-set size.
pub fn bench_validate(cfg: &BenchConfig, scenario: &ScenarioConfig) -> Result<Vec<BenchRow>, BenchError> {
    let setup = |e: &dyn std::fmt::Display| BenchError::Setup(e.to_string());
    let r = &scenario.requester;
    let (train, tests) =
        generate_task_with(&r.task, scenario.task_seed(), r.n_train, r.n_test_per_block, 1).map_err(|e| setup(&e))?;
    let params = TrainingParams::new(scenario.layer_sizes(), scenario.model.learning_rate, 0, scenario.seed);
    let model = init_weights(&params).map_err(|e| setup(&e))?;
    let mut block = make_block(BlockTemplate {
        height: 0,
        prev_header_hash: podl_core::Digest::ZERO,
        transactions: vec![Transaction::coinbase(50, b"bench".to_vec()), Transaction::transfer(b"bench".to_vec())],
        model: &model,
        training: Some(podl_core::dl::TrainingLineage::fresh(params.layer_sizes.clone(), params.init_seed, train.len())),
        claimed_accuracy: None,
        miner_id: MinerId::new("bench"),
        now: 0,
    })
    .map_err(|e| setup(&e))?;
    block.revealed_accuracy = Some(podl_core::dl::evaluate(&model, &tests[0]).map_err(|e| setup(&e))?);
    let mut log = CommitmentLog::new(1);
    log.open_window(0, 0, 10);
    log.commit_header(0, block.header.clone(), 1).map_err(|e| setup(&e))?;
    let subs = vec![Submission { block, arrival_time: 2, submitter: MinerId::new("bench") }];
    let mut samples = Vec::with_capacity(cfg.validate_repeats);
    for _ in 0..cfg.validate_repeats {
        let ms = time_ms(|| accept_block(&log, 0, &subs, &tests[0], None, scenario.round.max_model_bytes));
        samples.push(ms);
    }
    let check = accept_block(&log, 0, &subs, &tests[0], None, scenario.round.max_model_bytes);
    if check.accepted().is_none() {
        return Err(BenchError::Setup("benchmark block was not accepted".into()));
    }
    Ok(vec![row("validate", tests[0].len() as u64, &samples, 1.0, "ms/validation", Some(1960.0))])
}

pub fn run(kind: BenchKind, cfg: &BenchConfig, scenario: &ScenarioConfig) -> Result<Vec<BenchRow>, BenchError> {
    let mut rows = Vec::new();
    if matches!(kind, BenchKind::Hash | BenchKind::All) {
        rows.extend(bench_hash(cfg));
    }
    if matches!(kind, BenchKind::Sort | BenchKind::All) {
        rows.extend(bench_sort(cfg));
    }
    if matches!(kind, BenchKind::Hashtable | BenchKind::All) {
        rows.extend(bench_hashtable(cfg));
    }
    if matches!(kind, BenchKind::Validate | BenchKind::All) {
        rows.extend(bench_validate(cfg, scenario)?);
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(out: W, rows: &[BenchRow]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| BenchError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| BenchError::Io(e.to_string()))
}
