//! Deterministic evaluation of requested clauses against facts and a date.
//!
//! The same contract and request always give the same outputs and the same
//! trail. Any error aborts the request; the trail up to that point is kept.

mod coerce;
mod error;
mod session;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use coerce::{coerce_facts, coerce_value, const_value_on};
pub use error::{EngineError, ErrorCode};

use crate::audit::AuditTrail;
use crate::decimal::RoundingMode;
use crate::expr::Bindings;
use crate::loader::Contract;
use crate::model::{Clause, Facts, Value};
use session::Session;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationRequest {
    pub clause_names: Vec<String>,
    #[serde(default)]
    pub facts: Facts,
    pub evaluation_date: NaiveDate,
}

/// Settings the caller chooses; the library never reads the environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EvalOptions {
    /// Used by formulas that do not name a rounding mode.
    pub rounding: RoundingMode,
    /// Undeclared facts become warnings instead of errors.
    pub lenient: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub outputs: BTreeMap<String, Value>,
    pub trail: AuditTrail,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// A failed request: the error plus everything recorded before it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationFailure {
    pub error: EngineError,
    pub trail: AuditTrail,
}

impl fmt::Display for EvaluationFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.error.code, self.error.message)
    }
}

impl std::error::Error for EvaluationFailure {}

/// The version of `name` whose validity window contains `date`, with its
/// index in the contract file.
pub fn select_active_version<'c>(
    contract: &'c Contract,
    name: &str,
    date: NaiveDate,
) -> Result<(usize, &'c Clause), EngineError> {
    let versions = contract.versions(name).map_err(|_| unknown_clause(contract, name))?;
    versions.iter().find(|(_, c)| c.is_active_on(date)).copied().ok_or_else(|| {
        let windows: Vec<String> = versions
            .iter()
            .map(|(_, c)| {
                let show = |d: Option<NaiveDate>, open: &str| d.map_or(open.to_string(), |d| d.to_string());
                format!("[{}, {}]", show(c.validity_start_date, "-inf"), show(c.validity_end_date, "+inf"))
            })
            .collect();
        EngineError::new(
            ErrorCode::NoActiveVersion,
            format!("No version of clause {name} is in effect on {date}."),
        )
        .clause(name)
        .expected(format!("a date within {}", windows.join(" or ")))
        .got(date.to_string())
    })
}

fn unknown_clause(contract: &Contract, name: &str) -> EngineError {
    EngineError::new(
        ErrorCode::UnknownClause,
        format!("Contract {} has no clause named {name}.", contract.id()),
    )
    .clause(name)
}

fn check_request(contract: &Contract, request: &EvaluationRequest) -> Result<(), EngineError> {
    if request.clause_names.is_empty() {
        return Err(EngineError::new(ErrorCode::InvalidRequest, "Request names no clauses.").path("clause_names"));
    }
    let mut seen = BTreeSet::new();
    for (i, name) in request.clause_names.iter().enumerate() {
        if !seen.insert(name.as_str()) {
            return Err(EngineError::new(
                ErrorCode::InvalidRequest,
                format!("Clause {name} is requested more than once."),
            )
            .path(format!("clause_names/{i}")));
        }
        if !contract.has_clause(name) {
            return Err(unknown_clause(contract, name).path(format!("clause_names/{i}")));
        }
    }
    Ok(())
}

/// Requested clauses ordered so that a clause reading another requested
/// clause comes after it; otherwise request order is kept.
pub fn request_order<'r>(contract: &Contract, names: &'r [String]) -> Vec<&'r str> {
    let requested: BTreeSet<&str> = names.iter().map(String::as_str).collect();
    let deps: Vec<BTreeSet<&str>> = names
        .iter()
        .map(|n| {
            contract
                .clause_dependencies(n)
                .into_iter()
                .filter(|d| requested.contains(d) && *d != n)
                .collect()
        })
        .collect();
    let mut placed: BTreeSet<&str> = BTreeSet::new();
    let mut order = Vec::with_capacity(names.len());
    while order.len() < names.len() {
        let next = names
            .iter()
            .enumerate()
            .find(|(i, n)| !placed.contains(n.as_str()) && deps[*i].iter().all(|d| placed.contains(d)))
            .map(|(_, n)| n.as_str())
            .expect("validated contracts have no clause cycles");
        placed.insert(next);
        order.push(next);
    }
    order
}

/// Evaluates every requested clause and returns their outputs with one
/// merged trail.
pub fn evaluate_clauses(
    contract: &Contract,
    request: &EvaluationRequest,
    options: &EvalOptions,
) -> Result<EvaluationResult, EvaluationFailure> {
    let mut trail = AuditTrail::new(contract.id(), request.evaluation_date, request.clause_names.clone());
    let fail = |error: EngineError, mut trail: AuditTrail| {
        trail.error = Some(error.clone());
        EvaluationFailure { error, trail }
    };
    if let Err(e) = check_request(contract, request) {
        return Err(fail(e, trail));
    }
    let mut warnings = Vec::new();
    let bindings = match coerce::coerce_into(
        contract,
        request,
        options.lenient,
        &mut trail.variable_states,
        &mut warnings,
    ) {
        Ok(b) => b,
        Err(e) => return Err(fail(e, trail)),
    };
    let requested = request.clause_names.iter().cloned().collect();
    let mut session = Session::new(contract, *options, request.evaluation_date, bindings, requested, trail);
    let mut outputs = BTreeMap::new();
    for name in request_order(contract, &request.clause_names) {
        match session.clause_value(name) {
            Ok(p) => {
                outputs.insert(name.to_string(), p.value);
            }
            Err(e) => return Err(fail(e, session.trail)),
        }
    }
    let mut trail = session.trail;
    trail.outputs = outputs.clone();
    Ok(EvaluationResult {
        outputs,
        trail,
        warnings,
    })
}

/// Evaluates one specific clause version against already coerced bindings,
/// appending to `trail`. Clauses it reads are selected by `date`.
pub fn evaluate_clause(
    contract: &Contract,
    clause: &Clause,
    bindings: &Bindings,
    date: NaiveDate,
    options: &EvalOptions,
    trail: &mut AuditTrail,
) -> Result<Value, EngineError> {
    let index = contract
        .definition()
        .clauses
        .iter()
        .position(|c| c == clause)
        .ok_or_else(|| unknown_clause(contract, &clause.name))?;
    let clause = &contract.definition().clauses[index];
    let requested = BTreeSet::from([clause.name.clone()]);
    let taken = std::mem::replace(trail, AuditTrail::new(contract.id(), date, Vec::new()));
    let mut session = Session::new(contract, *options, date, bindings.clone(), requested, taken);
    let result = session.run_clause(index, clause).map(|p| p.value);
    *trail = session.trail;
    if let Err(e) = &result {
        trail.error = Some(e.clone());
    }
    result
}
