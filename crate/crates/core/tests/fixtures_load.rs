use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use dacl_core::loader::{load_contract, parse_contract, validate_contract};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

#[test]
fn shipped_contracts_load() {
    for name in ["energy_sup", "muni_ifb", "health_ppo", "logistics_msa", "fsc_amendment"] {
        let text = fs::read(fixtures().join(format!("{name}.dacl.json"))).unwrap();
        let (contract, report) = load_contract(&text).unwrap_or_else(|e| panic!("{name}: {e:?}"));
        assert_eq!(contract.id(), name);
        println!("{name}: warnings {:?}", report.warning_codes());
    }
}

#[test]
fn gap_contract_loads_with_a_warning() {
    let text = fs::read(fixtures().join("warnings/range_gap.dacl.json")).unwrap();
    let (_, report) = load_contract(&text).unwrap();
    assert!(report.warning_codes().contains(&"RANGE_GAP"), "{report:?}");
}

#[test]
fn every_rejection_reports_its_code() {
    let dir = fixtures().join("rejections");
    let expected: BTreeMap<String, String> =
        serde_json::from_slice(&fs::read(dir.join("expected.json")).unwrap()).unwrap();
    assert!(expected.len() >= 12);
    for (name, code) in &expected {
        let def = parse_contract(&fs::read(dir.join(format!("{name}.dacl.json"))).unwrap())
            .unwrap_or_else(|e| panic!("{name} should parse: {e}"));
        let report = validate_contract(&def);
        assert!(report.has_error(code), "{name}: expected {code}, got {:?}", report.errors);
    }
}
