//! `podl`: run scenarios, report accuracy growth, benchmark and verify
//! chains.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 verification failure,
//! 3 invariant violation during a run.

mod bench;
mod config;
mod report;
mod run;
mod verify;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use podl_core::netsim::Preset;

#[derive(Parser)]
#[command(name = "podl", version, about = "Proof-of-deep-learning chain simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ScenarioArgs {
    /// Scenario file (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_preset)]
    preset: Option<Preset>,
    #[arg(long)]
    rounds: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write its artifacts.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Print the accuracy-growth series of a finished run.
    Report {
        /// Run directory holding metrics.csv.
        #[arg(long, required_unless_present = "metrics")]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Microbenchmarks as CSV.
    Bench {
        #[arg(value_enum, default_value = "all")]
        kind: bench::BenchKind,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        trials: Option<usize>,
        /// Validation repeats.
        #[arg(long)]
        repeats: Option<usize>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-verify a chain dump by retraining every model.
    Verify {
        /// Run directory holding chain.json and datasets/.
        #[arg(long, required_unless_present = "dump")]
        out_dir: Option<PathBuf>,
        #[arg(long, requires = "datasets")]
        dump: Option<PathBuf>,
        #[arg(long)]
        datasets: Option<PathBuf>,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    s.parse::<Preset>().map_err(|e| e.to_string())
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Report(#[from] report::ReportError),
    #[error(transparent)]
    Bench(#[from] bench::BenchError),
    #[error(transparent)]
    Run(#[from] run::RunError),
    #[error(transparent)]
    Verify(#[from] verify::VerifyError),
    #[error("verification failed at heights {0:?}")]
    VerificationFailed(Vec<u64>),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Report(_) | CliError::Bench(_) | CliError::Io(_) => 1,
            CliError::Run(run::RunError::Setup(_)) => 1,
            CliError::Run(run::RunError::Io { .. }) => 1,
            CliError::Run(_) => 3,
            CliError::Verify(verify::VerifyError::Datasets(_)) => 1,
            CliError::Verify(_) | CliError::VerificationFailed(_) => 2,
        }
    }
}

fn load(args: &ScenarioArgs) -> Result<config::Loaded, config::ConfigError> {
    let ov = config::Overrides { seed: args.seed, preset: args.preset, rounds: args.rounds };
    config::load(args.config.as_deref(), &ov)
}

fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run { scenario, out_dir } => {
            let loaded = load(&scenario)?;
            let out = run::run(&loaded.scenario, &out_dir)?;
            let s = &out.summary;
            println!(
                "{} rounds, {} blocks accepted, final accuracy {}, recycling ratio {}; artifacts in {}",
                s.rounds,
                s.accepted_blocks,
                s.final_accuracy.as_deref().unwrap_or("-"),
                s.recycling_ratio_f64.map_or("-".into(), |r| format!("{r:.5}")),
                out_dir.display()
            );
            Ok(())
        }
        Command::Report { out_dir, metrics } => {
            let path = metrics.unwrap_or_else(|| out_dir.expect("clap enforces one").join(run::METRICS_FILE));
            let rows = report::read_growth(&path)?;
            report::write_growth(std::io::stdout().lock(), &rows)?;
            Ok(())
        }
        Command::Bench { kind, scenario, trials, repeats, out } => {
            let loaded = load(&scenario)?;
            let mut cfg = loaded.bench;
            cfg.trials = trials.unwrap_or(cfg.trials).max(1);
            cfg.validate_repeats = repeats.unwrap_or(cfg.validate_repeats).max(1);
            let rows = bench::run(kind, &cfg, &loaded.scenario)?;
            match out {
                Some(p) => {
                    let f = std::fs::File::create(&p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
                    bench::write_csv(f, &rows)?;
                }
                None => bench::write_csv(std::io::stdout().lock(), &rows)?,
            }
            if let Some(v) = rows.iter().find(|r| r.operation == "validate") {
                let limit = loaded.scenario.round.phase1_ms as f64 / 100.0;
                eprintln!(
                    "validate: mean {:.3} ms over {} repeats; 1% of the block interval is {limit:.0} ms; reference 1960 ms on other hardware (context only)",
                    v.mean_ms, v.trials
                );
            }
            Ok(())
        }
        Command::Verify { out_dir, dump, datasets, json } => {
            let (dump, datasets) = match (dump, datasets, out_dir) {
                (Some(d), Some(ds), _) => (d, ds),
                (_, _, Some(dir)) => (dir.join(run::CHAIN_FILE), dir.join(run::DATASETS_DIR)),
                _ => unreachable!("clap enforces the combination"),
            };
            let report = verify::verify(&dump, &datasets)?;
            let mut stdout = std::io::stdout().lock();
            let text = if json {
                serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))? + "\n"
            } else {
                verify::render(&report)
            };
            stdout.write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string()))?;
            if report.overall {
                Ok(())
            } else {
                Err(CliError::VerificationFailed(report.failed_heights()))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
