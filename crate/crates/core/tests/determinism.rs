mod common;

use drfsim::config::Protocol;
use drfsim::{run_scenario, RunOptions};

#[test]
fn same_seed_same_run() {
    let cfg = common::mobile(Protocol::Drf, 20.0, 5, 7, 20.0);
    let a = run_scenario(&cfg, RunOptions::default()).unwrap();
    let b = run_scenario(&cfg, RunOptions::default()).unwrap();
    assert_eq!(a.summary, b.summary);
    assert_eq!(a.output.log, b.output.log);
    assert_eq!(a.output.events_executed, b.output.events_executed);
}

#[test]
fn different_seeds_differ() {
    let a = run_scenario(&common::mobile(Protocol::Drf, 20.0, 1, 1, 20.0), RunOptions::default()).unwrap();
    let b = run_scenario(&common::mobile(Protocol::Drf, 20.0, 1, 2, 20.0), RunOptions::default()).unwrap();
    assert_ne!(a.summary.mobility_hash, b.summary.mobility_hash);
    assert_ne!(a.output.log, b.output.log);
}

#[test]
fn protocols_share_mobility_and_flows_on_matched_seeds() {
    for seed in 1..=3 {
        let atp = run_scenario(&common::mobile(Protocol::Atp, 30.0, 5, seed, 10.0), RunOptions::default()).unwrap();
        let drf = run_scenario(&common::mobile(Protocol::Drf, 30.0, 5, seed, 10.0), RunOptions::default()).unwrap();
        assert_eq!(atp.summary.mobility_hash, drf.summary.mobility_hash);
        assert_eq!(atp.output.flow_pairs, drf.output.flow_pairs);
        assert_ne!(atp.summary.scenario_hash, drf.summary.scenario_hash);
    }
}

#[test]
fn traces_do_not_perturb_the_run() {
    let cfg = common::mobile(Protocol::Atp, 10.0, 5, 3, 10.0);
    let plain = run_scenario(&cfg, RunOptions::default()).unwrap();
    let traced = run_scenario(&cfg, RunOptions { traces: true }).unwrap();
    assert_eq!(plain.summary, traced.summary);
    assert!(plain.output.energy_trace.is_empty());
    assert_eq!(traced.output.energy_trace.len(), 50 * 11);
}
