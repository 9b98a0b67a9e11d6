//! One PASS/FAIL line per acceptance criterion. Exits nonzero if any fails.

mod support;

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use dacl_core::audit::{canonical_serialize, trace_coverage};
use dacl_core::decimal::{Decimal, RoundingMode};
use dacl_core::engine::{evaluate_clauses, EvalOptions, EvaluationFailure, EvaluationRequest, EvaluationResult, ErrorCode};
use dacl_core::loader::{load_contract, parse_contract, validate_contract, Contract};
use dacl_core::model::{RawValue, Value};
use dacl_core::testkit::{concordance, generate_events, generate_suite, load_fixture, oracle_expected, Fixture};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FIXTURES: [&str; 4] = ["energy_sup", "muni_ifb", "health_ppo", "logistics_msa"];

type Outcome = Result<String, String>;

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn fixture(id: &str) -> Result<Fixture, String> {
    load_fixture(&dir(), id).map_err(|e| format!("{id}: {e}"))
}

fn contract(name: &str) -> Result<Contract, String> {
    let text = fs::read(dir().join(format!("{name}.dacl.json"))).map_err(|e| e.to_string())?;
    load_contract(&text).map(|(c, _)| c).map_err(|e| format!("{name}: {e:?}"))
}

fn run(c: &Contract, clauses: &[&str], facts: &[(&str, &str)], on: &str) -> Result<EvaluationResult, EvaluationFailure> {
    let request = EvaluationRequest {
        clause_names: clauses.iter().map(|s| s.to_string()).collect(),
        facts: facts
            .iter()
            .map(|(k, v)| {
                let raw = match *v {
                    "true" => RawValue::Boolean(true),
                    "false" => RawValue::Boolean(false),
                    other => RawValue::Text(other.to_string()),
                };
                (k.to_string(), raw)
            })
            .collect(),
        evaluation_date: on.parse().expect("test dates are valid"),
    };
    evaluate_clauses(c, &request, &EvalOptions::default())
}

fn check(ok: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

fn determinism() -> Outcome {
    let started = Instant::now();
    let mut evaluations = 0;
    for id in FIXTURES {
        let f = fixture(id)?;
        let events = generate_suite(&f.contract, &f.manifest, 1, 20).map_err(|e| e.to_string())?;
        check(events.len() == 20, || format!("{id}: {} events", events.len()))?;
        for e in &events {
            let request = e.request();
            let first = evaluate_clauses(&f.contract, &request, &EvalOptions::default())
                .map_err(|err| format!("{}: {}", e.event_id, err.error.message))?;
            let reference = canonical_serialize(&first.trail);
            for _ in 1..1000 {
                let again = evaluate_clauses(&f.contract, &request, &EvalOptions::default())
                    .map_err(|err| err.error.message)?;
                check(canonical_serialize(&again.trail) == reference, || format!("{} diverged", e.event_id))?;
            }
            evaluations += 1000;
        }
    }
    let took = started.elapsed();
    check(took < Duration::from_secs(60), || format!("took {took:?}"))?;
    Ok(format!("{evaluations} evaluations byte-identical per event in {:.1}s", took.as_secs_f64()))
}

fn diesel_table() -> Outcome {
    let c = contract("logistics_msa")?;
    let points = [("2.05", "1"), ("4.15", "22"), ("4.55", "27"), ("6.65", "48"), ("6.75", "49"), ("6.85", "50")];
    for (price, pct) in points {
        let r = run(&c, &["diesel_surcharge"], &[("diesel_price", price)], "2025-01-17").map_err(|e| e.error.message)?;
        let got = &r.outputs["diesel_surcharge"];
        check(*got == Value::decimal(pct), || format!("{price} gave {got}, want {pct}"))?;
    }
    Ok("2.05, 4.15, 4.55, 6.65 in table; 6.75, 6.85 above top".into())
}

fn energy_formula() -> Outcome {
    let c = contract("energy_sup")?;
    let sample =
        [("regional_gas_index", "6.0"), ("conversion_factor", "2.0"), ("y", "1.0"), ("r", "0.5"), ("f", "0.25")];
    let r = run(&c, &["price_per_unit"], &sample, "2025-01-01").map_err(|e| e.error.message)?;
    let got = r.outputs["price_per_unit"].to_string();
    check(got == "4.75", || format!("sample gave {got}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let text = |units: i64, scale: u32| Decimal::from_parts(units.into(), scale.into()).to_string();
    for i in 0..10_000 {
        let values = [
            text(rng.gen_range(1..=200_000), 4),
            text(rng.gen_range(1..=50_000), 4),
            text(rng.gen_range(-10_000..=10_000), 3),
            text(rng.gen_range(0..=10_000), 3),
            text(rng.gen_range(0..=10_000), 3),
        ];
        let names = ["regional_gas_index", "conversion_factor", "y", "r", "f"];
        let facts: Vec<(&str, &str)> = names.iter().copied().zip(values.iter().map(String::as_str)).collect();
        let r = run(&c, &["price_per_unit"], &facts, "2025-01-01").map_err(|e| e.error.message)?;
        let q: Vec<_> = values.iter().map(|v| support::rat(v)).collect();
        let exact = &q[0] / &q[1] + &q[2] + &q[3] + &q[4];
        let want = support::show(&exact, 2, RoundingMode::HalfUp);
        let got = r.outputs["price_per_unit"].to_string();
        check(got == want, || format!("binding {i} {facts:?}: got {got}, reference {want}"))?;
    }
    Ok("sample 4.75; 10000 random bindings match the rational reference".into())
}

fn oracle_concordance() -> Outcome {
    let started = Instant::now();
    let (mut matched, mut total) = (0, 0);
    let mut first_miss = None;
    for id in FIXTURES {
        let f = fixture(id)?;
        let oracle = dacl_gold::oracle_for(id).ok_or(format!("no oracle for {id}"))?;
        let events = generate_suite(&f.contract, &f.manifest, 400, 100).map_err(|e| e.to_string())?;
        let events = oracle_expected(oracle, &events).map_err(|e| e.to_string())?;
        for e in &events {
            total += 1;
            let verdict = evaluate_clauses(&f.contract, &e.request(), &EvalOptions::default())
                .map_err(|err| err.error.message)
                .and_then(|r| {
                    concordance(&r, e.expected.as_ref().expect("oracle filled it"), &Decimal::zero())
                        .map_err(|err| err.to_string())
                });
            match verdict {
                Ok(v) if v.is_match() => matched += 1,
                other => {
                    first_miss.get_or_insert(format!("{}: {other:?}", e.event_id));
                }
            }
        }
    }
    let took = started.elapsed();
    check(matched == 400 && total == 400, || format!("{matched}/{total}; first miss {first_miss:?}"))?;
    check(took < Duration::from_secs(10), || format!("took {took:?}"))?;
    Ok(format!("{matched}/{total} at tolerance 0 in {:.2}s", took.as_secs_f64()))
}

fn validation_rules() -> Outcome {
    let rejections = dir().join("rejections");
    let expected: BTreeMap<String, String> =
        serde_json::from_slice(&fs::read(rejections.join("expected.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    check(expected.len() >= 12, || format!("only {} rejection cases", expected.len()))?;
    for (name, code) in &expected {
        let text = fs::read(rejections.join(format!("{name}.dacl.json"))).map_err(|e| e.to_string())?;
        let def = parse_contract(&text).map_err(|e| format!("{name}: {e}"))?;
        let report = validate_contract(&def);
        check(report.has_error(code), || format!("{name}: want {code}, got {:?}", report.error_codes()))?;
    }
    let gap = fs::read(dir().join("warnings/range_gap.dacl.json")).map_err(|e| e.to_string())?;
    let (_, report) = load_contract(&gap).map_err(|e| format!("gap contract: {e:?}"))?;
    check(report.warning_codes().contains(&"RANGE_GAP"), || format!("gap warnings {:?}", report.warning_codes()))?;
    Ok(format!("{} rejections carry their codes; gap contract warns RANGE_GAP", expected.len()))
}

fn error_messages() -> Outcome {
    let logistics = contract("logistics_msa")?;
    let shipment = [
        ("weight", "0.6"),
        ("diesel_price", "4.15"),
        ("service_type", "linehaul"),
        ("equipment", "dry_van"),
        ("extra_stops", "0"),
        ("hours", "0"),
    ];
    let health = contract("health_ppo")?;
    let member = [
        ("age", "15"),
        ("relationship", "child"),
        ("plan_type", "family"),
        ("transport_mode", "foo"),
        ("emergency", "true"),
        ("admitted", "true"),
        ("deductible_met", "false"),
        ("medically_necessary", "false"),
    ];
    let cases = [
        (
            run(&logistics, &["diesel_surcharge", "linehaul_rate"], &shipment, "2025-01-17"),
            ErrorCode::MissingVariable,
            "Variable miles required for clause linehaul_rate. Expected: decimal - shipment distance in miles.",
        ),
        (
            run(&logistics, &["diesel_surcharge"], &[("diesel_price", "4.15"), ("weight", "abc")], "2025-01-17"),
            ErrorCode::TypeMismatch,
            "Variable weight must be a number, got string 'abc'.",
        ),
        (
            run(&health, &["ambulance_coverage"], &member, "2025-03-01"),
            ErrorCode::InvalidEnum,
            "Variable transport_mode has invalid value 'foo'. Valid values: air, ground.",
        ),
    ];
    for (outcome, code, want) in cases {
        let err = outcome.err().ok_or(format!("{code:?} case evaluated"))?;
        check(err.error.code == code, || format!("want {code:?}, got {:?}", err.error.code))?;
        check(err.error.message == want, || format!("message {:?}", err.error.message))?;
    }
    Ok("missing variable, type mismatch and enum messages are exact".into())
}

fn coverage() -> Outcome {
    let mut parts = Vec::new();
    for id in FIXTURES {
        let f = fixture(id)?;
        let events = generate_events(&f.contract, &f.manifest, 7, 1).map_err(|e| e.to_string())?;
        let mut traces = Vec::new();
        for e in &events {
            let r = evaluate_clauses(&f.contract, &e.request(), &EvalOptions::default())
                .map_err(|err| format!("{}: {}", e.event_id, err.error.message))?;
            traces.push(r.trail);
        }
        let report = trace_coverage(&traces, f.contract.definition()).map_err(|e| e.to_string())?;
        check(report.is_complete() && report.total == f.manifest.states, || {
            format!("{id}: {}/{} (manifest {})", report.hit, report.total, f.manifest.states)
        })?;
        parts.push(format!("{id} {}/{}", report.hit, report.total));
    }
    Ok(parts.join(", "))
}

fn versioning() -> Outcome {
    let c = contract("fsc_amendment")?;
    let at = |d: &str| run(&c, &["fsc_table"], &[("diesel_price", "4.15")], d);
    let before = at("2024-06-30").map_err(|e| e.error.message)?;
    let after = at("2024-07-01").map_err(|e| e.error.message)?;
    let (b, a) = (&before.trail.execution_path[0], &after.trail.execution_path[0]);
    check(b.version != a.version, || "same version both sides".into())?;
    check(before.outputs != after.outputs, || "same output both sides".into())?;
    let boundary: NaiveDate = "2024-07-01".parse().expect("valid");
    check(b.window.end == boundary.pred_opt() && a.window.start == Some(boundary), || {
        format!("windows {:?} and {:?}", b.window, a.window)
    })?;
    let err = at("2023-01-01").err().ok_or("2023 evaluated")?;
    check(err.error.code == ErrorCode::NoActiveVersion, || format!("{:?}", err.error.code))?;
    Ok(format!(
        "2024-06-30 -> version {} ({}), 2024-07-01 -> version {} ({}); 2023-01-01 has no active version",
        b.version, before.outputs["fsc_table"], a.version, after.outputs["fsc_table"]
    ))
}

/// Results that depend on hosted language models are not reproduced. Criteria
/// 1 to 8 stand in for them, so this one passes only when those do.
fn substitution(failed_before: usize) -> Outcome {
    let what = "results that need hosted language models are substituted, not reproduced";
    if failed_before == 0 {
        Ok(format!("{what}; the criteria standing in for them all passed"))
    } else {
        Err(format!("{what}; {failed_before} of the criteria standing in for them failed"))
    }
}

fn report(n: usize, name: &str, outcome: Outcome) -> usize {
    match outcome {
        Ok(detail) => {
            println!("PASS {n} {name}: {detail}");
            0
        }
        Err(why) => {
            println!("FAIL {n} {name}: {why}");
            1
        }
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("determinism", determinism),
        ("diesel bracket table", diesel_table),
        ("energy formula", energy_formula),
        ("oracle concordance", oracle_concordance),
        ("validation rules", validation_rules),
        ("error messages", error_messages),
        ("state coverage", coverage),
        ("temporal versioning", versioning),
    ];
    let mut failed = 0;
    for (n, (name, criterion)) in criteria.iter().enumerate() {
        failed += report(n + 1, name, criterion());
    }
    failed += report(9, "out of scope", substitution(failed));
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
