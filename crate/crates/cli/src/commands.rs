use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use dacl_core::audit::{render_trace, trace_coverage, AuditTrail, CoverageReport};
use dacl_core::decimal::{Decimal, RoundingMode};
use dacl_core::engine::{evaluate_clauses, EvalOptions, EvaluationRequest};
use dacl_core::loader::{load_contract, parse_contract, validate_contract, Contract, LoadError};
use dacl_core::model::{Facts, RawValue, Value};
use dacl_core::testkit::{
    concordance, generate_events, oracle_expected, oracle_for, write_jsonl, ClauseDiff, EventRecord, Manifest, Verdict,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{BatchArgs, EvaluateArgs, GenArgs};

/// Exit status for a finished command; `Err` means usage or I/O trouble.
type Status = Result<u8, String>;

pub fn options(rounding: Option<RoundingMode>) -> EvalOptions {
    let mut o = EvalOptions::default();
    if let Some(r) = rounding {
        o.rounding = r;
    }
    o
}

fn read(path: &Path) -> Result<Vec<u8>, String> {
    fs::read(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), String> {
    fs::write(path, bytes).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

/// Writes to standard output. A closed pipe (`dacl ... | head`) ends the
/// process quietly instead of panicking.
fn out(text: &str) {
    let mut stdout = std::io::stdout().lock();
    if let Err(e) = stdout.write_all(text.as_bytes()).and_then(|()| stdout.flush()) {
        if e.kind() != std::io::ErrorKind::BrokenPipe {
            eprintln!("dacl: cannot write to standard output: {e}");
        }
        std::process::exit(2);
    }
}

fn print_json<T: Serialize>(value: &T) {
    out(&format!("{}\n", serde_json::to_string_pretty(value).expect("reports serialize")));
}

/// Loads a contract, or says why not: `Ok(Err(code))` when the report has
/// already been printed.
fn contract(path: &Path) -> Result<Result<Contract, u8>, String> {
    match load_contract(&read(path)?) {
        Ok((c, report)) => {
            for w in &report.warnings {
                eprintln!("warning {} at {}: {}", w.code, w.path, w.message);
            }
            Ok(Ok(c))
        }
        Err(LoadError::Parse(e)) => Err(format!("{}: {e}", path.display())),
        Err(LoadError::Invalid(report)) => {
            print_json(&report);
            Ok(Err(1))
        }
    }
}

pub fn validate(path: &Path) -> Status {
    let def = parse_contract(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))?;
    let report = validate_contract(&def);
    print_json(&report);
    Ok(if report.is_deployable() { 0 } else { 1 })
}

pub fn evaluate(a: EvaluateArgs, options: EvalOptions) -> Status {
    let c = match contract(&a.contract)? {
        Ok(c) => c,
        Err(code) => return Ok(code),
    };
    let mut facts: Facts = match &a.facts_file {
        Some(p) => serde_json::from_slice(&read(p)?).map_err(|e| format!("{}: {e}", p.display()))?,
        None => Facts::new(),
    };
    facts.extend(a.facts.into_iter().map(|(k, v)| (k, RawValue::Text(v))));
    let request = EvaluationRequest { clause_names: a.clauses, facts, evaluation_date: a.date };
    let options = EvalOptions { lenient: a.lenient, ..options };

    let (trail, code) = match evaluate_clauses(&c, &request, &options) {
        Ok(result) => {
            for w in &result.warnings {
                eprintln!("warning: {w}");
            }
            print_json(&result);
            (result.trail, 0)
        }
        Err(failure) => {
            print_json(&serde_json::json!({ "error": failure.error }));
            (failure.trail, 1)
        }
    };
    if let Some(path) = &a.trace {
        write(path, &serde_json::to_vec_pretty(&trail).expect("trails serialize"))?;
    }
    if a.render {
        eprint!("{}", render_trace(&trail));
    }
    Ok(code)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum Outcome {
    /// Evaluated with nothing to compare against.
    Ok,
    Match,
    Mismatch,
    Error,
}

#[derive(Debug, Serialize)]
struct EventLine {
    line: usize,
    event_id: Option<String>,
    status: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    outputs: Option<BTreeMap<String, Value>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    diffs: Option<Vec<ClauseDiff>>,
    #[serde(skip)]
    trail: Option<AuditTrail>,
    #[serde(skip)]
    succeeded: bool,
}

impl EventLine {
    fn failed(line: usize, event_id: Option<String>, code: &str, message: String) -> Self {
        EventLine {
            line,
            event_id,
            status: Outcome::Error,
            outputs: None,
            error: Some(serde_json::json!({ "code": code, "message": message })),
            diffs: None,
            trail: None,
            succeeded: false,
        }
    }
}

#[derive(Debug, Default, Serialize)]
struct Summary {
    events: usize,
    ok: usize,
    #[serde(rename = "match")]
    matched: usize,
    mismatch: usize,
    error: usize,
    coverage: Option<CoverageSummary>,
}

#[derive(Debug, Serialize)]
struct CoverageSummary {
    hit: usize,
    total: usize,
    fraction: Decimal,
}

fn run_event(c: &Contract, line: usize, text: &str, a: &BatchArgs, options: &EvalOptions) -> EventLine {
    let event: EventRecord = match serde_json::from_str(text) {
        Ok(e) => e,
        Err(e) => return EventLine::failed(line, None, "MALFORMED_EVENT", e.to_string()),
    };
    let id = Some(event.event_id.clone());
    if event.contract_id != c.id() {
        let message = format!("event is for contract {}, not {}", event.contract_id, c.id());
        return EventLine::failed(line, id, "FOREIGN_EVENT", message);
    }
    match evaluate_clauses(c, &event.request(), options) {
        Err(failure) => EventLine {
            error: Some(serde_json::to_value(&failure.error).expect("errors serialize")),
            trail: Some(failure.trail),
            ..EventLine::failed(line, id, "", String::new())
        },
        Ok(result) => {
            let (status, diffs) = match (&event.expected, a.concordance) {
                (Some(expected), true) => match concordance(&result, expected, &a.tolerance) {
                    Ok(Verdict::Match) => (Outcome::Match, None),
                    Ok(Verdict::Mismatch(d)) => (Outcome::Mismatch, Some(d)),
                    // An empty expectation checks nothing.
                    Err(_) => (Outcome::Ok, None),
                },
                _ => (Outcome::Ok, None),
            };
            EventLine {
                line,
                event_id: id,
                status,
                outputs: Some(result.outputs),
                error: None,
                diffs,
                trail: Some(result.trail),
                succeeded: true,
            }
        }
    }
}

fn file_name(event_id: &str) -> String {
    let safe: String =
        event_id.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' }).collect();
    format!("{safe}.json")
}

pub fn batch(a: BatchArgs, options: EvalOptions) -> Status {
    let c = match contract(&a.contract)? {
        Ok(c) => c,
        Err(code) => return Ok(code),
    };
    let text = String::from_utf8(read(&a.events)?).map_err(|e| format!("{}: {e}", a.events.display()))?;
    let options = EvalOptions { lenient: a.lenient, ..options };
    let lines: Vec<(usize, &str)> =
        text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.trim().is_empty()).collect();

    let pool = rayon::ThreadPoolBuilder::new().num_threads(a.jobs).build().map_err(|e| e.to_string())?;
    // Collecting an indexed parallel iterator keeps input order.
    let results: Vec<EventLine> =
        pool.install(|| lines.par_iter().map(|(n, l)| run_event(&c, *n, l, &a, &options)).collect());

    if let Some(dir) = &a.traces {
        fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
        for r in &results {
            if let (Some(id), Some(trail)) = (&r.event_id, &r.trail) {
                write(&dir.join(file_name(id)), &serde_json::to_vec_pretty(trail).expect("trails serialize"))?;
            }
        }
    }

    let mut summary = Summary { events: results.len(), ..Summary::default() };
    let mut body = String::new();
    for r in &results {
        match r.status {
            Outcome::Ok => summary.ok += 1,
            Outcome::Match => summary.matched += 1,
            Outcome::Mismatch => summary.mismatch += 1,
            Outcome::Error => summary.error += 1,
        }
        body.push_str(&serde_json::to_string(r).expect("lines serialize"));
        body.push('\n');
    }
    let trails: Vec<AuditTrail> = results.into_iter().filter(|r| r.succeeded).filter_map(|r| r.trail).collect();
    let report = trace_coverage(&trails, c.definition()).map_err(|e| e.to_string())?;
    summary.coverage = Some(CoverageSummary { hit: report.hit, total: report.total, fraction: report.fraction });

    match &a.out {
        Some(path) => write(path, body.as_bytes())?,
        None => out(&body),
    }
    out(&format!("{}\n", serde_json::to_string(&serde_json::json!({ "summary": summary })).expect("summary serializes")));
    Ok(if summary.mismatch + summary.error == 0 { 0 } else { 1 })
}

fn default_manifest(contract: &Path, contract_id: &str) -> PathBuf {
    contract.with_file_name(format!("{contract_id}.manifest.json"))
}

pub fn gen_events(a: GenArgs) -> Status {
    let c = match contract(&a.contract)? {
        Ok(c) => c,
        Err(code) => return Ok(code),
    };
    let manifest_path = a.manifest.clone().unwrap_or_else(|| default_manifest(&a.contract, c.id()));
    let manifest: Manifest =
        serde_json::from_slice(&read(&manifest_path)?).map_err(|e| format!("{}: {e}", manifest_path.display()))?;
    let events = match generate_events(&c, &manifest, a.seed, a.count_per_state) {
        Ok(e) => e,
        Err(e) => {
            print_json(&serde_json::json!({ "error": { "code": "GENERATION_FAILED", "message": e.to_string() } }));
            return Ok(1);
        }
    };
    let events = match &a.oracle {
        None => events,
        Some(name) => {
            let oracle = oracle_for(name).ok_or_else(|| format!("no reference oracle named {name}"))?;
            match oracle_expected(oracle, &events) {
                Ok(e) => e,
                Err(gap) => {
                    print_json(&serde_json::json!({ "error": { "code": "ORACLE_GAP", "message": gap.to_string() } }));
                    return Ok(1);
                }
            }
        }
    };
    let body = write_jsonl(&events);
    match &a.out {
        Some(path) => write(path, body.as_bytes())?,
        None => out(&body),
    }
    Ok(0)
}

/// A trace file holds either a bare trail or an evaluation result around one.
#[derive(Deserialize)]
#[serde(untagged)]
enum TraceFile {
    Trail(Box<AuditTrail>),
    Result { trail: Box<AuditTrail> },
}

fn read_trail(path: &Path) -> Result<AuditTrail, String> {
    let file: TraceFile = serde_json::from_slice(&read(path)?).map_err(|_| format!("{} is not a trace", path.display()))?;
    Ok(match file {
        TraceFile::Trail(t) | TraceFile::Result { trail: t } => *t,
    })
}

pub fn coverage(contract_path: &Path, dir: &Path) -> Status {
    let c = match contract(contract_path)? {
        Ok(c) => c,
        Err(code) => return Ok(code),
    };
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| format!("cannot read {}: {e}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let trails = paths.iter().map(|p| read_trail(p)).collect::<Result<Vec<_>, _>>()?;
    let report: CoverageReport = trace_coverage(&trails, c.definition()).map_err(|e| e.to_string())?;
    print_json(&report);
    Ok(if report.is_complete() { 0 } else { 1 })
}

pub fn render(path: &Path) -> Status {
    out(&render_trace(&read_trail(path)?));
    Ok(0)
}
