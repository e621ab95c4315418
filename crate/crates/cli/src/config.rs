//! Scenario files. TOML with a few top-level keys and the sections
//! `[round]`, `[timing]`, `[network]`, `[model]`, `[requester]`
//! (with `[requester.task]`), `[miners.N]` and `[bench]`. Every key is
//! optional; see `docs/config.md` for the schema and defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::Deserialize;

use podl_core::actors::Strategy;
use podl_core::consensus::{ForkRule, RoundConfig};
use podl_core::netsim::{DelayModel, Preset};
use podl_core::sim::{MinerConfig, ModelConfig, RequesterConfig, ScenarioConfig, TimingConfig};

#[derive(Debug, thiserror::Error)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "config line {l}: {}", self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

impl ConfigError {
    fn at(text: &str, offset: Option<usize>, message: impl Into<String>) -> Self {
        let line = offset.map(|o| text[..o.min(text.len())].matches('\n').count() + 1);
        ConfigError { line, message: message.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub hash_mb: usize,
    pub sort_n: usize,
    pub hashtable_n: usize,
    pub load_factor: f64,
    pub trials: usize,
    pub validate_repeats: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            hash_mb: 16,
            sort_n: 1_000_000,
            hashtable_n: 1_000_000,
            load_factor: 0.38,
            trials: 5,
            validate_repeats: 1000,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MinerSection {
    id: Option<String>,
    #[serde(default = "honest")]
    strategy: toml::Spanned<String>,
    compute_share: f64,
    learning_rate: Option<f64>,
    commit_own: Option<bool>,
    lr_scale: Option<f64>,
    chunk_epochs: Option<u32>,
    max_chunks: Option<u32>,
}

fn honest() -> toml::Spanned<String> {
    toml::Spanned::new(0..0, "honest".into())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    preset: Option<toml::Spanned<String>>,
    seed: Option<u64>,
    rounds: Option<u64>,
    epoch_budget: Option<u32>,
    full_nodes: Option<usize>,
    prune_keep: Option<usize>,
    fork_rule: Option<ForkRule>,
    round: Option<RoundConfig>,
    timing: Option<TimingSection>,
    network: Option<DelayModel>,
    model: Option<ModelConfig>,
    requester: Option<RequesterConfig>,
    miners: Option<BTreeMap<String, toml::Spanned<MinerSection>>>,
    bench: Option<BenchConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimingSection {
    commit_lead_ms: Option<u64>,
    miner_overhead_ms: Option<u64>,
}

/// A parsed scenario file plus its bench settings.
#[derive(Clone, Debug, PartialEq)]
pub struct Loaded {
    pub scenario: ScenarioConfig,
    pub bench: BenchConfig,
}

/// Command-line overrides, applied after the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub preset: Option<Preset>,
    pub rounds: Option<u64>,
}

pub fn load(path: Option<&Path>, ov: &Overrides) -> Result<Loaded, ConfigError> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| ConfigError { line: None, message: format!("{}: {e}", p.display()) })?,
        None => String::new(),
    };
    parse(&text, ov)
}

fn parse_strategy(text: &str, m: &MinerSection, section_start: usize) -> Result<Strategy, ConfigError> {
    let name = m.strategy.get_ref().as_str();
    let span = m.strategy.span();
    let offset = if span.is_empty() { section_start } else { span.start };
    let at = |msg: String| ConfigError::at(text, Some(offset), msg);
    let extra = |keys: &[(&str, bool)]| {
        keys.iter().find(|(_, set)| *set).map(|(k, _)| at(format!("key {k:?} does not apply to strategy {name:?}")))
    };
    let thief_keys = [("commit_own", m.commit_own.is_some())];
    let overfit_keys =
        [("lr_scale", m.lr_scale.is_some()), ("chunk_epochs", m.chunk_epochs.is_some()), ("max_chunks", m.max_chunks.is_some())];
    let s = match name {
        "honest" | "inflator" | "private" => {
            if let Some(e) = extra(&thief_keys).or_else(|| extra(&overfit_keys)) {
                return Err(e);
            }
            match name {
                "honest" => Strategy::Honest,
                "inflator" => Strategy::Inflator,
                _ => Strategy::Private,
            }
        }
        "thief" => {
            if let Some(e) = extra(&overfit_keys) {
                return Err(e);
            }
            Strategy::Thief { commit_own: m.commit_own.unwrap_or(true) }
        }
        "overfitter" => {
            if let Some(e) = extra(&thief_keys) {
                return Err(e);
            }
            let Strategy::Overfitter { lr_scale, chunk_epochs, max_chunks } = Strategy::overfitter() else {
                unreachable!()
            };
            Strategy::Overfitter {
                lr_scale: m.lr_scale.unwrap_or(lr_scale),
                chunk_epochs: m.chunk_epochs.unwrap_or(chunk_epochs),
                max_chunks: m.max_chunks.unwrap_or(max_chunks),
            }
        }
        other => {
            return Err(at(format!(
                "unknown strategy {other:?} (expected honest, thief, overfitter, inflator or private)"
            )))
        }
    };
    Ok(s)
}

pub fn parse(text: &str, ov: &Overrides) -> Result<Loaded, ConfigError> {
    let file: FileConfig =
        toml::from_str(text).map_err(|e| ConfigError::at(text, e.span().map(|s| s.start), e.message().to_string()))?;
    let mut cfg = ScenarioConfig::default();

    let preset = match (&ov.preset, &file.preset) {
        (Some(p), _) => Some(*p),
        (None, Some(p)) => Some(
            p.get_ref()
                .parse::<Preset>()
                .map_err(|e| ConfigError::at(text, Some(p.span().start), e.to_string()))?,
        ),
        (None, None) => None,
    };
    if let Some(r) = file.round {
        cfg.round = r;
    }
    if let Some(p) = preset {
        cfg.apply_preset(p);
        // Explicit phase lengths win over the preset.
        let raw: toml::Table = toml::from_str(text).unwrap_or_default();
        if let Some(round) = raw.get("round").and_then(|v| v.as_table()) {
            let explicit = RoundConfig::deserialize(toml::Value::Table(round.clone())).unwrap_or_default();
            if round.contains_key("phase1_ms") {
                cfg.round.phase1_ms = explicit.phase1_ms;
            }
            if round.contains_key("phase2_ms") {
                cfg.round.phase2_ms = explicit.phase2_ms;
            }
        }
    }
    if let Some(v) = file.epoch_budget {
        cfg.epoch_budget = v;
    }
    if let Some(v) = file.seed {
        cfg.seed = v;
    }
    if let Some(v) = file.rounds {
        cfg.rounds = v;
    }
    if let Some(v) = file.full_nodes {
        cfg.full_nodes = v;
    }
    cfg.prune_keep = file.prune_keep;
    if let Some(v) = file.fork_rule {
        cfg.fork_rule = v;
    }
    let mut timing = TimingConfig::default();
    if let Some(t) = file.timing {
        timing.commit_lead_ms = t.commit_lead_ms.unwrap_or(timing.commit_lead_ms);
        timing.miner_overhead_ms = t.miner_overhead_ms.unwrap_or(timing.miner_overhead_ms);
    }
    if let Some(d) = file.network {
        timing.delay = d;
    }
    cfg.timing = timing;
    if let Some(m) = file.model {
        cfg.model = m;
    }
    if let Some(r) = file.requester {
        cfg.requester = r;
    }
    if let Some(miners) = file.miners {
        let mut ordered = Vec::with_capacity(miners.len());
        for (key, section) in miners {
            let idx: usize = key.parse().map_err(|_| {
                ConfigError::at(text, Some(section.span().start), format!("miner section [miners.{key}] needs a numeric index"))
            })?;
            ordered.push((idx, section));
        }
        ordered.sort_by_key(|(i, _)| *i);
        cfg.miners = Vec::with_capacity(ordered.len());
        for (idx, section) in ordered {
            let span = section.span();
            let m = section.into_inner();
            let strategy = parse_strategy(text, &m, span.start)?;
            let id = m.id.clone().unwrap_or_else(|| format!("miner-{idx}"));
            let mut mc = MinerConfig::new(id, strategy, m.compute_share);
            mc.learning_rate = m.learning_rate;
            if cfg.miners.iter().any(|x: &MinerConfig| x.id == mc.id) {
                return Err(ConfigError::at(text, Some(span.start), format!("miner id {:?} is repeated", mc.id)));
            }
            cfg.miners.push(mc);
        }
    }
    if let Some(s) = ov.seed {
        cfg.seed = s;
    }
    if let Some(r) = ov.rounds {
        cfg.rounds = r;
    }
    cfg.validate().map_err(|e| ConfigError { line: None, message: e.to_string() })?;
    let bench = file.bench.unwrap_or_default();
    if bench.hash_mb == 0
        || bench.sort_n == 0
        || bench.hashtable_n == 0
        || bench.trials == 0
        || bench.validate_repeats == 0
        || !(bench.load_factor > 0.0 && bench.load_factor < 1.0)
    {
        return Err(ConfigError { line: None, message: "bench sizes must be positive and load_factor in (0, 1)".into() });
    }
    Ok(Loaded { scenario: cfg, bench })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ok(text: &str) -> Loaded {
        parse(text, &Overrides::default()).unwrap()
    }

    fn line_of(text: &str) -> Option<usize> {
        parse(text, &Overrides::default()).unwrap_err().line
    }

    #[test]
    fn empty_file_is_the_default_scenario() {
        let l = ok("");
        assert_eq!(l.scenario, ScenarioConfig::default());
        assert_eq!(l.scenario.round.phase1_ms, 600_000);
        assert_eq!(l.scenario.epoch_budget, 2400);
        assert_eq!(l.scenario.miners.len(), 4);
        assert_eq!(l.bench, BenchConfig::default());
    }

    #[test]
    fn preset_then_explicit_values() {
        let l = ok("preset = \"eth-like\"\n[round]\nphase2_ms = 2000\n");
        assert_eq!(l.scenario.round.phase1_ms, 12_000);
        assert_eq!(l.scenario.round.phase2_ms, 2000);
        assert_eq!(l.scenario.epoch_budget, 48);
        let ov = Overrides { preset: Some(Preset::Litecoin), seed: Some(9), rounds: None };
        let l = parse("preset = \"eth-like\"\nseed = 3\n", &ov).unwrap();
        assert_eq!(l.scenario.round.phase1_ms, 150_000);
        assert_eq!(l.scenario.seed, 9);
    }

    #[test]
    fn miners_and_strategies() {
        let text = r#"
[miners.1]
strategy = "overfitter"
compute_share = 0.5
lr_scale = 4.0

[miners.0]
id = "alice"
strategy = "thief"
commit_own = false
compute_share = 0.5
"#;
        let l = ok(text);
        assert_eq!(l.scenario.miners[0].id, "alice");
        assert_eq!(l.scenario.miners[0].strategy, Strategy::Thief { commit_own: false });
        assert_eq!(l.scenario.miners[1].id, "miner-1");
        assert!(matches!(l.scenario.miners[1].strategy, Strategy::Overfitter { lr_scale, .. } if lr_scale == 4.0));
    }

    #[test]
    fn errors_point_at_the_line() {
        assert_eq!(line_of("seed = 1\nrounds = \"ten\"\n"), Some(2));
        assert_eq!(line_of("seed = 1\n\n[round]\nphase3_ms = 4\n"), Some(4));
        assert_eq!(line_of("[miners.0]\ncompute_share = 1.0\nstrategy = \"sneaky\"\n"), Some(3));
        assert_eq!(line_of("seed = 2\n[miners.0]\ncompute_share = 1.0\nlr_scale = 2.0\n"), Some(2));
        assert_eq!(line_of("preset = \"dogecoin\"\n"), Some(1));
        assert_eq!(line_of("seed = \n"), Some(1));
    }

    #[test]
    fn validation_errors_have_no_line() {
        let e = parse("[miners.0]\ncompute_share = 0.5\n", &Overrides::default()).unwrap_err();
        assert_eq!(e.line, None);
        assert!(e.to_string().contains("sum"));
    }
}
