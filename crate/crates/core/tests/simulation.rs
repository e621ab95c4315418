use podl_core::actors::Strategy;
use podl_core::chain::ChainDump;
use podl_core::consensus::verify_chain;
use podl_core::sim::{double_spend_scenario, run_scenario, AttackOutcome, ScenarioConfig};

#[test]
fn dump_round_trip_verifies() {
    let mut cfg = ScenarioConfig::quick(11, 4);
    cfg.requester.n_test_per_block = 100;
    let out = run_scenario(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chain.json");
    out.dump().unwrap().write(&path).unwrap();
    let (store, ids) = ChainDump::read(&path).unwrap().into_store().unwrap();
    assert_eq!(store.tip_hash(), out.store.tip_hash());
    assert_eq!(ids.len(), store.len());
    let report = verify_chain(&store, out.train_set(), &out.test_map()).unwrap();
    assert!(report.overall);
}

#[test]
fn thief_without_own_commitment_never_wins() {
    for seed in 1..4 {
        let mut cfg = ScenarioConfig::quick(seed, 5);
        cfg.requester.n_test_per_block = 100;
        cfg.miners[0].strategy = Strategy::Thief { commit_own: false };
        let out = run_scenario(&cfg).unwrap();
        assert_eq!(out.summary.thief_wins, 0);
        assert_eq!(out.summary.accepted_blocks, 5);
    }
}

#[test]
fn small_attacker_cannot_replace() {
    for seed in 1..4 {
        let mut cfg = ScenarioConfig::quick(seed, 6);
        cfg.requester.n_test_per_block = 100;
        let r = double_spend_scenario(&cfg, 0.1, 6, true).unwrap();
        assert_ne!(r.outcome, AttackOutcome::Replace);
    }
}
