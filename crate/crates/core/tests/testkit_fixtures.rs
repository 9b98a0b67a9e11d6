use std::path::PathBuf;

use dacl_core::audit::trace_coverage;
use dacl_core::decimal::Decimal;
use dacl_core::engine::{evaluate_clauses, EvalOptions};
use dacl_core::testkit::{
    concordance, generate_events, generate_suite, load_fixture, oracle_expected, write_jsonl, Fixture, GoldOracle,
};

const FIXTURES: [&str; 4] = ["energy_sup", "muni_ifb", "health_ppo", "logistics_msa"];

fn fixture(id: &str) -> Fixture {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    load_fixture(&dir, id).unwrap()
}

fn oracle(id: &str) -> &'static dyn GoldOracle {
    dacl_gold::oracle_for(id).unwrap()
}

#[test]
fn manifests_count_the_declared_states() {
    for id in FIXTURES {
        let f = fixture(id);
        let states = dacl_core::audit::declared_states(f.contract.definition());
        assert_eq!(states.len(), f.manifest.states, "{id}");
        for (clause, n) in &f.manifest.state_split {
            assert_eq!(states.iter().filter(|s| s.clause == *clause).count(), *n, "{id} {clause}");
        }
    }
}

#[test]
fn sweeps_reach_every_state_and_agree_with_the_oracles() {
    for id in FIXTURES {
        let f = fixture(id);
        let events = generate_events(&f.contract, &f.manifest, 7, 1).unwrap();
        assert!(events.len() >= f.manifest.states, "{id}");
        let events = oracle_expected(oracle(id), &events).unwrap();
        let mut traces = Vec::new();
        for e in &events {
            let result = evaluate_clauses(&f.contract, &e.request(), &EvalOptions::default()).unwrap();
            let verdict = concordance(&result, e.expected.as_ref().unwrap(), &Decimal::zero()).unwrap();
            assert!(verdict.is_match(), "{}: {verdict:?}", e.event_id);
            traces.push(result.trail);
        }
        let report = trace_coverage(&traces, f.contract.definition()).unwrap();
        assert!(report.is_complete(), "{id}: {:?}", report.clauses);
        assert_eq!(report.total, f.manifest.states);
    }
}

#[test]
fn bracket_sweep_includes_both_boundary_ticks() {
    let f = fixture("logistics_msa");
    let events = generate_events(&f.contract, &f.manifest, 7, 1).unwrap();
    let prices: Vec<String> = events.iter().map(|e| e.facts["diesel_price"].to_string()).collect();
    assert!(prices.iter().any(|p| p == "4.10"));
    assert!(prices.iter().any(|p| p == "4.199"));
}

#[test]
fn generation_is_deterministic_in_the_seed() {
    let f = fixture("logistics_msa");
    let a = write_jsonl(&generate_suite(&f.contract, &f.manifest, 11, 100).unwrap());
    let b = write_jsonl(&generate_suite(&f.contract, &f.manifest, 11, 100).unwrap());
    let c = write_jsonl(&generate_suite(&f.contract, &f.manifest, 12, 100).unwrap());
    assert_eq!(a, b);
    assert_ne!(a, c);
}
