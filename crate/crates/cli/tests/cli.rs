use std::path::Path;
use std::process::{Command, Output};

fn podl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_podl")).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL: &str = "preset = \"eth-like\"\nrounds = 4\n[model]\nhidden_layers = [8]\nlearning_rate = 1e-4\n[requester]\nn_test_per_block = 100\n";

/// `top` goes before the first section, `sections` after the last.
fn config_with(dir: &Path, top: &str, sections: &str) -> std::path::PathBuf {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, format!("{top}{SMALL}{sections}")).unwrap();
    path
}

#[test]
fn honest_run_writes_artifacts_and_reverifies() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config_with(tmp.path(), "", "");
    let out_dir = tmp.path().join("run");
    let out = podl(&["run", "--config", p(&cfg), "--out-dir", p(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["chain.json", "metrics.csv", "timing.csv", "trace.jsonl", "summary.json", "rounds.json", "config.json"] {
        assert!(out_dir.join(f).exists(), "{f} missing");
    }
    let metrics = std::fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 5);
    let verify = podl(&["verify", "--out-dir", p(&out_dir)]);
    assert_eq!(verify.status.code(), Some(0));
    let report = podl(&["report", "--out-dir", p(&out_dir)]);
    let text = String::from_utf8(report.stdout).unwrap();
    let epochs: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(epochs, ["48", "96", "144", "192"]);
}

#[test]
fn same_seed_gives_identical_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config_with(tmp.path(), "", "");
    let mut files = Vec::new();
    for k in 0..2 {
        let dir = tmp.path().join(format!("r{k}"));
        assert!(podl(&["run", "--config", p(&cfg), "--seed", "7", "--out-dir", p(&dir)]).status.success());
        files.push(std::fs::read(dir.join("metrics.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn thief_scenario_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let extra = "[miners.0]\ncompute_share = 0.5\n[miners.1]\nstrategy = \"thief\"\ncompute_share = 0.5\n";
    let cfg = config_with(tmp.path(), "", extra);
    let dir = tmp.path().join("run");
    assert!(podl(&["run", "--config", p(&cfg), "--out-dir", p(&dir)]).status.success());
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["thief_wins"], 0);
    assert_eq!(summary["accepted_blocks"], 4);
}

#[test]
fn pruned_dump_verifies() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config_with(tmp.path(), "prune_keep = 1\n", "");
    let dir = tmp.path().join("run");
    assert!(podl(&["run", "--config", p(&cfg), "--out-dir", p(&dir)]).status.success());
    let dump: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("chain.json")).unwrap()).unwrap();
    assert!(!dump["pruned_heights"].as_array().unwrap().is_empty());
    let out = podl(&["verify", "--out-dir", p(&dir)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "seed = 1\n[round]\nphase1 = 5\n").unwrap();
    let out = podl(&["run", "--config", p(&bad), "--out-dir", p(&tmp.path().join("x"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
    assert_eq!(podl(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(podl(&["--help"]).status.code(), Some(0));
    let garbage = tmp.path().join("chain.json");
    std::fs::write(&garbage, "{").unwrap();
    let out = podl(&["verify", "--dump", p(&garbage), "--datasets", p(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_model_bytes_are_dump_corruption() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config_with(tmp.path(), "", "");
    let dir = tmp.path().join("run");
    assert!(podl(&["run", "--config", p(&cfg), "--out-dir", p(&dir)]).status.success());
    let path = dir.join("chain.json");
    let mut dump: serde_json::Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    dump["blocks"][1].as_object_mut().unwrap().remove("model");
    std::fs::write(&path, serde_json::to_vec(&dump).unwrap()).unwrap();
    let out = podl(&["verify", "--out-dir", p(&dir)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("corrupt"));
}
