use std::fs;
use std::path::PathBuf;

use chrono::{Days, NaiveDate};
use dacl_core::decimal::Decimal;
use dacl_core::loader::{dependency_graph, parse_contract, validate_contract, CyclicDependency};
use dacl_core::model::{ClauseKind, ContractDefinition};
use proptest::prelude::*;
use serde_json::json;

fn parse(v: serde_json::Value) -> ContractDefinition {
    parse_contract(v.to_string().as_bytes()).unwrap()
}

/// Brackets with two-decimal bounds between 0.00 and 5.00, possibly overlapping or inverted.
fn brackets() -> impl Strategy<Value = Vec<(i64, i64)>> {
    prop::collection::vec((0i64..500, 0i64..120), 1..6)
        .prop_map(|v| v.into_iter().map(|(lo, w)| (lo, lo + w - 20)).collect())
}

fn range_contract(bs: &[(i64, i64)], with_default: bool) -> ContractDefinition {
    let show = |u: i64| Decimal::from_parts(u.into(), 2).to_string();
    let list: Vec<_> = bs
        .iter()
        .enumerate()
        .map(|(i, (lo, hi))| json!({"min": show(*lo), "max": show(*hi), "output": {"value": {"decimal": i.to_string()}}}))
        .collect();
    let mut clause = json!({"name": "t", "kind": "range", "input_variable": "x", "brackets": list});
    if with_default {
        clause["default"] = json!({"value": {"decimal": "-1"}});
    }
    parse(json!({
        "dacl_version": "1", "contract_id": "ranges",
        "variables": [{"name": "x", "source": "external", "type": "decimal"}],
        "clauses": [clause]
    }))
}

/// Windows as (start offset, length in days, open-ended?) from 2020-01-01.
fn windows() -> impl Strategy<Value = Vec<(u64, u64, bool)>> {
    prop::collection::vec((0u64..3000, 1u64..900, any::<bool>()), 1..5)
}

fn versioned_contract(ws: &[(u64, u64, bool)]) -> ContractDefinition {
    let origin: NaiveDate = "2020-01-01".parse().unwrap();
    let clauses: Vec<_> = ws
        .iter()
        .map(|(start, len, open)| {
            let mut c = json!({"name": "t", "kind": "range", "input_variable": "x",
                "brackets": [{"min": "0", "max": "1", "output": {"value": {"decimal": "1"}}}],
                "validity_start_date": (origin + Days::new(*start)).to_string()});
            if !open {
                c["validity_end_date"] = json!((origin + Days::new(start + len)).to_string());
            }
            c
        })
        .collect();
    parse(json!({
        "dacl_version": "1", "contract_id": "versions",
        "variables": [{"name": "x", "source": "external", "type": "decimal"}],
        "clauses": clauses
    }))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    /// Whatever passes validation has at most one bracket per input, scanning
    /// the hull at 0.001.
    #[test]
    fn accepted_tables_never_overlap(bs in brackets(), with_default in any::<bool>()) {
        let def = range_contract(&bs, with_default);
        let report = validate_contract(&def);
        if report.is_deployable() {
            let ClauseKind::Range(r) = &def.clauses[0].kind else { unreachable!() };
            let lo = r.brackets.iter().map(|b| b.min.clone()).min().unwrap();
            let hi = r.brackets.iter().map(|b| b.max.clone()).max().unwrap();
            let (start, end) = ((lo.round(3, dacl_core::decimal::RoundingMode::Floor)), hi);
            let mut x = start;
            let step: Decimal = "0.001".parse().unwrap();
            while x <= end {
                let n = r.brackets.iter().filter(|b| b.min <= x && x <= b.max).count();
                prop_assert!(n <= 1, "{} brackets at {}", n, x);
                x = x.checked_add(&step).unwrap();
            }
        } else {
            let overlapping = bs.iter().enumerate().any(|(i, a)| {
                bs.iter().skip(i + 1).any(|b| a.0 <= b.1 && b.0 <= a.1)
            });
            let inverted = bs.iter().any(|(lo, hi)| lo > hi);
            prop_assert!(overlapping || inverted, "{:?}", report.errors);
        }
    }

    /// Accepted version sets have at most one active version per day, and
    /// exactly one inside their overall span.
    #[test]
    fn accepted_versions_never_overlap(ws in windows()) {
        let def = versioned_contract(&ws);
        let report = validate_contract(&def);
        if !report.is_deployable() {
            return Ok(());
        }
        let first = def.clauses.iter().filter_map(|c| c.validity_start_date).min().unwrap();
        let last = def.clauses.iter().map(|c| c.validity_end_date).max().unwrap();
        let origin: NaiveDate = "2019-06-01".parse().unwrap();
        for d in 0..(366 * 10) {
            let date = origin + Days::new(d);
            let active = def.clauses.iter().filter(|c| c.is_active_on(date)).count();
            prop_assert!(active <= 1, "{} versions on {}", active, date);
            let inside = date >= first && last.is_none_or(|l| date <= l);
            if inside {
                prop_assert_eq!(active, 1, "gap on {}", date);
            }
        }
    }

    #[test]
    fn validation_is_pure(bs in brackets(), ws in windows()) {
        let a = range_contract(&bs, false);
        prop_assert_eq!(validate_contract(&a), validate_contract(&a.clone()));
        let b = versioned_contract(&ws);
        prop_assert_eq!(validate_contract(&b), validate_contract(&b.clone()));
    }
}

#[test]
fn sub_formulas_are_ordered_by_what_they_read() {
    let def = parse(json!({
        "dacl_version": "1", "contract_id": "order",
        "variables": [
            {"name": "w", "source": "external", "type": "decimal"},
            {"name": "r", "source": "external", "type": "decimal"},
            {"name": "fee", "source": "const", "type": "decimal", "const_value": {"decimal": "5"}}
        ],
        "clauses": [{"name": "price", "kind": "pricing", "precision": 2, "result_variable": "total",
            "sub_formulas": [{"target": "base", "expression": "w * r"}, {"target": "total", "expression": "base + fee"}]}]
    }));
    let order = dependency_graph(&def).unwrap();
    let at = |n: &str| order.iter().position(|x| x == n).unwrap();
    assert!(at("price.base") < at("price.total"));
    assert!(at("w") < at("price.base"));
}

#[test]
fn clause_cycles_are_reported_with_their_members() {
    let def = parse(json!({
        "dacl_version": "1", "contract_id": "cycle",
        "clauses": [
            {"name": "a", "kind": "pricing", "precision": 2, "result_variable": "x", "sub_formulas": [{"target": "x", "expression": "b + 1"}]},
            {"name": "b", "kind": "pricing", "precision": 2, "result_variable": "x", "sub_formulas": [{"target": "x", "expression": "a + 1"}]}
        ]
    }));
    let CyclicDependency(members) = dependency_graph(&def).unwrap_err();
    assert_eq!(members, ["a", "b"]);
}

#[test]
fn surcharge_is_ordered_before_the_rate_that_reads_it() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/logistics_msa.dacl.json");
    let def = parse_contract(&fs::read(path).unwrap()).unwrap();
    let order = dependency_graph(&def).unwrap();
    let at = |n: &str| order.iter().position(|x| x == n).unwrap();
    assert!(at("diesel_surcharge") < at("linehaul_rate"));
    assert!(at("diesel_price") < at("diesel_surcharge"));
}
