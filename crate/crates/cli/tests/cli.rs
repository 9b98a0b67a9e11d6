use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value as Json;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn dacl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dacl")).args(args).env_remove("DACL_ROUNDING").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(o: &Output) -> Json {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn lines(o: &Output) -> Vec<Json> {
    String::from_utf8(o.stdout.clone()).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn path(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_exit_codes() {
    let ok = dacl(&["validate", path(&fixture("energy_sup.dacl.json"))]);
    assert_eq!(code(&ok), 0);
    assert_eq!(json(&ok)["errors"], Json::Array(vec![]));

    let bad = dacl(&["validate", path(&fixture("rejections/overlapping_brackets.dacl.json"))]);
    assert_eq!(code(&bad), 1);
    assert_eq!(json(&bad)["errors"][0]["code"], "RANGE_OVERLAP");

    let missing = dacl(&["validate", "/nonexistent/contract.json"]);
    assert_eq!(code(&missing), 2);
    assert!(missing.stdout.is_empty());

    let dir = tempfile::tempdir().unwrap();
    let garbled = dir.path().join("garbled.json");
    fs::write(&garbled, "{ not json").unwrap();
    let o = dacl(&["validate", path(&garbled)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}

#[test]
fn evaluate_prints_outputs_and_writes_the_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.json");
    let o = dacl(&[
        "evaluate",
        path(&fixture("logistics_msa.dacl.json")),
        "--clauses",
        "diesel_surcharge",
        "--facts",
        "diesel_price=4.15",
        "--date",
        "2025-01-17",
        "--trace",
        path(&trace),
        "--render",
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["outputs"]["diesel_surcharge"]["decimal"], "22");
    assert!(String::from_utf8_lossy(&o.stderr).contains("bracket [4.10, 4.199] → 22%"));

    let rendered = dacl(&["render", path(&trace)]);
    assert_eq!(code(&rendered), 0);
    let again = dacl(&["render", path(&trace)]);
    assert_eq!(rendered.stdout, again.stdout);
    assert!(String::from_utf8_lossy(&rendered.stdout).contains("diesel_surcharge = 22"));
}

#[test]
fn evaluate_reports_engine_errors_as_objects() {
    let energy = fixture("energy_sup.dacl.json");
    let o = dacl(&[
        "evaluate",
        path(&energy),
        "--clauses",
        "price_per_unit",
        "--facts",
        "regional_gas_index=6.0,conversion_factor=2.0,y=1.0,r=0.5",
        "--date",
        "2025-01-01",
    ]);
    assert_eq!(code(&o), 1);
    let err = &json(&o)["error"];
    assert_eq!(err["code"], "MISSING_VARIABLE");
    assert_eq!(
        err["message"],
        "Variable f required for clause price_per_unit. Expected: decimal - fuel retention charge per unit."
    );

    let o = dacl(&[
        "evaluate",
        path(&fixture("fsc_amendment.dacl.json")),
        "--clauses",
        "fsc_table",
        "--facts",
        "diesel_price=4.15",
        "--date",
        "2020-01-01",
    ]);
    assert_eq!(code(&o), 1);
    assert_eq!(json(&o)["error"]["code"], "NO_ACTIVE_VERSION");
}

#[test]
fn facts_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let facts = dir.path().join("facts.json");
    fs::write(
        &facts,
        r#"{"regional_gas_index": 6.0, "conversion_factor": 2.0, "y": 1.0, "r": 0.5, "f": 9}"#,
    )
    .unwrap();
    let o = dacl(&[
        "evaluate",
        path(&fixture("energy_sup.dacl.json")),
        "--clauses",
        "price_per_unit",
        "--facts-file",
        path(&facts),
        "--facts",
        "f=0.25",
        "--date",
        "2025-01-01",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(json(&o)["outputs"]["price_per_unit"]["decimal"], "4.75");
}

#[test]
fn rounding_comes_from_the_environment_only_when_asked() {
    let dir = tempfile::tempdir().unwrap();
    let contract = dir.path().join("half.dacl.json");
    fs::write(
        &contract,
        r#"{"dacl_version": "1", "contract_id": "half",
            "variables": [{"name": "x", "source": "external", "type": "decimal"}],
            "clauses": [{"name": "p", "kind": "pricing", "precision": 0, "result_variable": "v",
                         "sub_formulas": [{"target": "v", "expression": "x"}]}]}"#,
    )
    .unwrap();
    let run = |env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_dacl"));
        cmd.args(["evaluate", path(&contract), "--clauses", "p", "--facts", "x=2.5", "--date", "2025-01-01"]);
        match env {
            Some(v) => cmd.env("DACL_ROUNDING", v),
            None => cmd.env_remove("DACL_ROUNDING"),
        };
        let o = cmd.output().unwrap();
        json(&o)["outputs"]["p"]["decimal"].as_str().unwrap().to_string()
    };
    assert_eq!(run(None), "3");
    assert_eq!(run(Some("half_even")), "2");
    let bogus = Command::new(env!("CARGO_BIN_EXE_dacl"))
        .args(["validate", path(&contract)])
        .env("DACL_ROUNDING", "sideways")
        .output()
        .unwrap();
    assert_eq!(code(&bogus), 2);
}

#[test]
fn generated_suite_round_trips_through_batch_and_coverage() {
    let dir = tempfile::tempdir().unwrap();
    let events = dir.path().join("events.jsonl");
    let traces = dir.path().join("traces");
    let contract = fixture("logistics_msa.dacl.json");
    let g = dacl(&["gen-events", path(&contract), "--seed", "7", "--oracle", "logistics_msa", "--out", path(&events)]);
    assert_eq!(code(&g), 0);

    let serial = dacl(&["batch", path(&contract), path(&events), "--concordance", "--jobs", "1"]);
    let parallel = dacl(&[
        "batch",
        path(&contract),
        path(&events),
        "--concordance",
        "--jobs",
        "4",
        "--traces",
        path(&traces),
    ]);
    assert_eq!(code(&parallel), 0);
    assert_eq!(serial.stdout, parallel.stdout, "output order must not depend on workers");

    let out = lines(&parallel);
    let summary = &out.last().unwrap()["summary"];
    let n = out.len() - 1;
    assert_eq!(summary["events"], n);
    assert_eq!(summary["match"], n);
    assert_eq!(summary["mismatch"], 0);
    assert_eq!(summary["coverage"]["hit"], 76);
    for (i, line) in out[..n].iter().enumerate() {
        assert_eq!(line["line"], i + 1);
    }

    let cov = dacl(&["coverage", path(&contract), path(&traces)]);
    assert_eq!(code(&cov), 0);
    let report = json(&cov);
    assert_eq!((report["hit"].as_u64(), report["total"].as_u64()), (Some(76), Some(76)));
}

#[test]
fn batch_isolates_bad_events() {
    let dir = tempfile::tempdir().unwrap();
    let contract = fixture("energy_sup.dacl.json");
    let events = dir.path().join("events.jsonl");
    let good = r#"{"event_id":"a","contract_id":"energy_sup","facts":{"regional_gas_index":"6.0","conversion_factor":"2.0","y":"1.0","r":"0.5","f":"0.25"},"evaluation_date":"2025-01-01","clause_names":["price_per_unit"],"expected":{"price_per_unit":{"decimal":"4.75"}}}"#;
    let short = good.replace(r#","f":"0.25""#, "").replace(r#""a""#, r#""b""#);
    let wrong = good.replace("4.75", "4.76").replace(r#""a""#, r#""c""#);
    fs::write(&events, format!("{good}\nnot json\n\n{short}\n{wrong}\n")).unwrap();

    let out_file = dir.path().join("results.jsonl");
    let o = dacl(&["batch", path(&contract), path(&events), "--concordance", "--out", path(&out_file)]);
    assert_eq!(code(&o), 1);
    let summary = &lines(&o)[0]["summary"];
    assert_eq!(summary["events"], 4);
    assert_eq!((summary["match"].as_u64(), summary["mismatch"].as_u64(), summary["error"].as_u64()), (Some(1), Some(1), Some(2)));

    let results: Vec<Json> =
        fs::read_to_string(&out_file).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let status: Vec<&str> = results.iter().map(|r| r["status"].as_str().unwrap()).collect();
    assert_eq!(status, ["match", "error", "error", "mismatch"]);
    assert_eq!(results[1]["error"]["code"], "MALFORMED_EVENT");
    assert_eq!(results[2]["error"]["code"], "MISSING_VARIABLE");
    assert_eq!(results[3]["diffs"][0]["diff"], "-0.01");

    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let o = dacl(&["batch", path(&contract), path(&empty)]);
    assert_eq!(code(&o), 0);
    let summary = &lines(&o)[0]["summary"];
    assert_eq!(summary["events"], 0);
    assert_eq!(summary["match"], 0);
}

#[test]
fn invalid_contracts_stop_evaluation_with_their_report() {
    let o = dacl(&[
        "evaluate",
        path(&fixture("rejections/clause_cycle.dacl.json")),
        "--clauses",
        "a",
        "--date",
        "2025-01-01",
    ]);
    assert_eq!(code(&o), 1);
    assert!(json(&o)["errors"].as_array().unwrap().iter().any(|e| e["code"] == "DEPENDENCY_CYCLE"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&dacl(&["evaluate", "x.json", "--date", "2025-01-01"])), 2);
    assert_eq!(code(&dacl(&["frobnicate"])), 2);
    assert_eq!(code(&dacl(&["render", "/nonexistent/trace.json"])), 2);
}
