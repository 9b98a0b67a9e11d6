use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use chrono::NaiveDate;
use dacl_core::audit::{render_trace, replay, DecisionOutcome};
use dacl_core::engine::{evaluate_clauses, EvalOptions, EvaluationFailure, EvaluationRequest, EvaluationResult, ErrorCode};
use dacl_core::loader::{load_contract, Contract};
use dacl_core::model::{Facts, RawValue, Value};

fn contract(name: &str) -> Contract {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../../fixtures/{name}.dacl.json"));
    load_contract(&fs::read(path).unwrap()).unwrap().0
}

fn date(s: &str) -> NaiveDate {
    s.parse().unwrap()
}

fn facts(pairs: &[(&str, &str)]) -> Facts {
    pairs
        .iter()
        .map(|(k, v)| {
            let raw = match *v {
                "true" => RawValue::Boolean(true),
                "false" => RawValue::Boolean(false),
                other => RawValue::Text(other.to_string()),
            };
            (k.to_string(), raw)
        })
        .collect()
}

fn run(c: &Contract, clauses: &[&str], pairs: &[(&str, &str)], on: &str) -> Result<EvaluationResult, EvaluationFailure> {
    let request = EvaluationRequest {
        clause_names: clauses.iter().map(|s| s.to_string()).collect(),
        facts: facts(pairs),
        evaluation_date: date(on),
    };
    evaluate_clauses(c, &request, &EvalOptions::default())
}

fn gold(contract_id: &str, clauses: &[&str], pairs: &[(&str, &str)], on: &str) -> BTreeMap<String, String> {
    let facts = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    let names: Vec<String> = clauses.iter().map(|s| s.to_string()).collect();
    dacl_gold::oracle_for(contract_id)
        .unwrap()
        .evaluate(&facts, date(on), &names)
        .unwrap()
        .into_iter()
        .map(|(k, v)| {
            let shown = match v {
                dacl_gold::GoldValue::Decimal(d) => d.to_string(),
                dacl_gold::GoldValue::Text(t) => t,
                dacl_gold::GoldValue::Boolean(b) => b.to_string(),
            };
            (k, shown)
        })
        .collect()
}

#[test]
fn diesel_schedule_points() {
    let c = contract("logistics_msa");
    for (price, pct) in [("2.05", "1"), ("4.15", "22"), ("4.55", "27"), ("6.65", "48"), ("6.75", "49"), ("6.85", "50")] {
        let r = run(&c, &["diesel_surcharge"], &[("diesel_price", price)], "2025-01-17").unwrap();
        assert_eq!(r.outputs["diesel_surcharge"], Value::decimal(pct), "at {price}");
    }
}

#[test]
fn micro_gap_between_brackets_resolves_downward() {
    let c = contract("logistics_msa");
    let r = run(&c, &["diesel_surcharge"], &[("diesel_price", "4.1995")], "2025-01-17").unwrap();
    assert_eq!(r.outputs["diesel_surcharge"], Value::decimal("22"));
}

#[test]
fn below_the_schedule_has_no_bracket() {
    let c = contract("logistics_msa");
    let err = run(&c, &["diesel_surcharge"], &[("diesel_price", "1.99")], "2025-01-17").unwrap_err();
    assert_eq!(err.error.code, ErrorCode::NoMatchingBracket);
    assert_eq!(err.trail.error.as_ref(), Some(&err.error));
}

#[test]
fn sample_shipment_uses_tier_b_after_the_surcharge() {
    let c = contract("logistics_msa");
    let shipment = [
        ("weight", "0.6"),
        ("miles", "348"),
        ("diesel_price", "4.15"),
        ("service_type", "linehaul"),
        ("equipment", "dry_van"),
        ("extra_stops", "0"),
        ("hours", "0"),
    ];
    let r = run(&c, &["diesel_surcharge", "linehaul_rate"], &shipment, "2025-01-17").unwrap();
    let dp = &r.trail.decision_points;
    assert!(matches!(dp[0].outcome, DecisionOutcome::Bracket { ref label, .. } if label.as_deref() == Some("22%")));
    let rate = dp.iter().find(|d| d.clause == "linehaul_rate").unwrap();
    match &rate.outcome {
        DecisionOutcome::Case { label, .. } => assert_eq!(label.as_deref(), Some("linehaul tier B dry van")),
        other => panic!("{other:?}"),
    }
    let want = gold("logistics_msa", &["diesel_surcharge", "linehaul_rate"], &shipment, "2025-01-17");
    assert_eq!(r.outputs["linehaul_rate"].to_string(), want["linehaul_rate"]);
    // Requested in the opposite order, the surcharge still runs first.
    let r2 = run(&c, &["linehaul_rate", "diesel_surcharge"], &shipment, "2025-01-17").unwrap();
    assert_eq!(r2.trail.execution_path[0].clause, "diesel_surcharge");
    assert_eq!(r2.outputs, r.outputs);
}

#[test]
fn missing_distance_names_the_clause_and_the_expectation() {
    let c = contract("logistics_msa");
    let err = run(
        &c,
        &["diesel_surcharge", "linehaul_rate"],
        &[
            ("weight", "0.6"),
            ("diesel_price", "4.15"),
            ("service_type", "linehaul"),
            ("equipment", "dry_van"),
            ("extra_stops", "0"),
            ("hours", "0"),
        ],
        "2025-01-17",
    )
    .unwrap_err();
    assert_eq!(err.error.code, ErrorCode::MissingVariable);
    assert_eq!(
        err.error.message,
        "Variable miles required for clause linehaul_rate. Expected: decimal - shipment distance in miles."
    );
    assert!(err.trail.outputs.is_empty());
}

#[test]
fn coercion_messages() {
    let c = contract("health_ppo");
    let base = [
        ("age", "15"),
        ("relationship", "child"),
        ("plan_type", "family"),
        ("transport_mode", "foo"),
        ("emergency", "true"),
        ("admitted", "true"),
        ("deductible_met", "false"),
        ("medically_necessary", "false"),
    ];
    let err = run(&c, &["ambulance_coverage"], &base, "2025-03-01").unwrap_err();
    assert_eq!(err.error.code, ErrorCode::InvalidEnum);
    assert_eq!(err.error.message, "Variable transport_mode has invalid value 'foo'. Valid values: air, ground.");

    let c = contract("logistics_msa");
    let err = run(&c, &["diesel_surcharge"], &[("diesel_price", "4.15"), ("weight", "abc")], "2025-03-01").unwrap_err();
    assert_eq!(err.error.code, ErrorCode::TypeMismatch);
    assert_eq!(err.error.message, "Variable weight must be a number, got string 'abc'.");
}

#[test]
fn sample_member_is_covered_with_admission() {
    let c = contract("health_ppo");
    let member = [
        ("age", "15"),
        ("relationship", "child"),
        ("plan_type", "family"),
        ("transport_mode", "ground"),
        ("emergency", "true"),
        ("admitted", "true"),
        ("deductible_met", "false"),
        ("medically_necessary", "false"),
    ];
    let r = run(&c, &["ambulance_coverage"], &member, "2025-03-01").unwrap();
    let want = gold("health_ppo", &["ambulance_coverage"], &member, "2025-03-01");
    assert_eq!(r.outputs["ambulance_coverage"].to_string(), want["ambulance_coverage"]);
    assert_eq!(want["ambulance_coverage"], "covered_with_admission");
}

const ENERGY: [(&str, &str); 5] = [
    ("regional_gas_index", "6.0"),
    ("conversion_factor", "2.0"),
    ("y", "1.0"),
    ("r", "0.5"),
    ("f", "0.25"),
];

#[test]
fn energy_price_and_its_rendering() {
    let c = contract("energy_sup");
    let r = run(&c, &["price_per_unit"], &ENERGY, "2025-01-01").unwrap();
    assert_eq!(r.outputs["price_per_unit"].to_string(), "4.75");
    assert_eq!(r.trail.formula_breakdown.len(), 1);
    let text = render_trace(&r.trail);
    assert!(text.contains("6.0 / 2.0 + 1.0 + 0.5 + 0.25 = 4.75"), "{text}");
    assert_eq!(replay(&r.trail).unwrap(), r.outputs);
}

#[test]
fn amended_table_switches_versions_at_the_boundary() {
    let c = contract("fsc_amendment");
    let before = run(&c, &["fsc_table"], &[("diesel_price", "4.15")], "2024-06-30").unwrap();
    let after = run(&c, &["fsc_table"], &[("diesel_price", "4.15")], "2024-07-01").unwrap();
    assert_eq!(before.outputs["fsc_table"], Value::decimal("22"));
    assert_eq!(after.outputs["fsc_table"], Value::decimal("23"));
    let (b, a) = (&before.trail.execution_path[0], &after.trail.execution_path[0]);
    assert_eq!((b.version, a.version), (0, 1));
    assert_eq!(b.window.end, Some(date("2024-06-30")));
    assert_eq!(a.window.start, Some(date("2024-07-01")));
    assert_eq!(a.window.end, None);

    let mid = run(&c, &["fsc_table"], &[("diesel_price", "4.15")], "2024-03-01").unwrap();
    assert!(render_trace(&mid.trail).contains("fsc_table: bracket [4.10, 4.199] → 22%"));

    let err = run(&c, &["fsc_table"], &[("diesel_price", "4.15")], "2023-01-01").unwrap_err();
    assert_eq!(err.error.code, ErrorCode::NoActiveVersion);
}

#[test]
fn yearly_invoice_versions_follow_the_oracle() {
    let c = contract("muni_ifb");
    let order = [("quantity", "120.5"), ("cpi_index", "104.3")];
    for on in ["2023-06-01", "2024-06-01", "2025-06-01"] {
        let r = run(&c, &["invoice_amount"], &order, on).unwrap();
        let want = gold("muni_ifb", &["invoice_amount"], &order, on);
        assert_eq!(r.outputs["invoice_amount"].to_string(), want["invoice_amount"], "on {on}");
        assert_eq!(replay(&r.trail).unwrap(), r.outputs);
    }
}

#[test]
fn failed_evaluation_renders_the_error_block() {
    let c = contract("energy_sup");
    let err = run(&c, &["price_per_unit"], &ENERGY[..4], "2025-01-01").unwrap_err();
    let text = render_trace(&err.trail);
    assert!(text.contains("ERROR MISSING_VARIABLE"), "{text}");
    let block = &text[text.find("ERROR").unwrap()..];
    assert!(block.contains(
        "message: Variable f required for clause price_per_unit. Expected: decimal - fuel retention charge per unit."
    ));
    assert!(!block.contains("outputs:"));
}
