//! The audit trail every evaluation produces, plus tools over it:
//! canonical bytes, a text rendering, replay and state coverage.

mod coverage;
mod render;
mod replay;

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use coverage::{declared_states, states_hit, trace_coverage, ClauseCoverage, CoverageError, CoverageReport, StateId, StateOutcome};
pub use render::render_trace;
pub use replay::{replay, ReplayError};

use crate::decimal::{Decimal, RoundingMode};
use crate::engine::EngineError;
use crate::expr::OperandValue;
use crate::model::{CmpOp, RawValue, Value, ValueType, VariableSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableOutcome {
    Ok,
    Missing,
    TypeMismatch,
    InvalidEnum,
    Unknown,
    NoActiveConst,
}

/// A variable as the evaluation saw it: input facts, constants, and values
/// computed by clauses (`clause`) or procedure locals (`clause.step`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableState {
    pub name: String,
    pub source: VariableSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_type: Option<ValueType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<RawValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Value>,
    pub outcome: VariableOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionKind {
    Logical,
    Range,
}

/// A comparison evaluated while testing case `case`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseAtom {
    pub case: usize,
    pub lhs: OperandValue,
    pub op: CmpOp,
    pub rhs: OperandValue,
    pub result: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionOutcome {
    Case {
        index: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    Bracket {
        index: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        min: Decimal,
        max: Decimal,
    },
    /// Extrapolated `steps` increments above the top bracket.
    AboveTop {
        top_index: usize,
        top_max: Decimal,
        top_output: Decimal,
        step_size: Decimal,
        increment: Decimal,
        steps: Decimal,
    },
    Default,
    NoMatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionPoint {
    pub clause: String,
    pub version: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<String>,
    pub kind: DecisionKind,
    /// The range input; absent for logical decisions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<OperandValue>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub atoms: Vec<CaseAtom>,
    pub outcome: DecisionOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<Value>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub terminal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundingApplied {
    pub precision: u32,
    pub mode: RoundingMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedValue {
    pub name: String,
    pub value: Value,
}

/// One formula evaluation: a pricing sub-formula or a case's formula output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormulaEntry {
    pub clause: String,
    pub version: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<String>,
    /// Sub-formula target, or `case_<i>` / `default` for case outputs.
    pub target: String,
    pub expression: String,
    pub inputs: Vec<NamedValue>,
    /// Working precision used for inexact operations.
    pub precision: u32,
    /// Mode used by `round` calls inside the expression and the final rounding.
    pub mode: RoundingMode,
    pub intermediate: Decimal,
    pub result: Decimal,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounding: Option<RoundingApplied>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    #[serde(default)]
    pub start: Option<NaiveDate>,
    #[serde(default)]
    pub end: Option<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathEntry {
    pub clause: String,
    pub version: usize,
    pub window: Window,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub requested: bool,
    /// For a step that delegates to another clause: that clause.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_excerpt: Option<String>,
    /// Filled when the clause or step finishes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<Value>,
    /// The step produced a terminal value and ended its procedure.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub terminated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditTrail {
    pub contract_id: String,
    pub evaluation_date: NaiveDate,
    pub requested: Vec<String>,
    pub variable_states: Vec<VariableState>,
    pub decision_points: Vec<DecisionPoint>,
    pub formula_breakdown: Vec<FormulaEntry>,
    pub execution_path: Vec<PathEntry>,
    #[serde(default)]
    pub outputs: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<EngineError>,
}

impl AuditTrail {
    pub fn new(contract_id: &str, evaluation_date: NaiveDate, requested: Vec<String>) -> Self {
        AuditTrail {
            contract_id: contract_id.to_string(),
            evaluation_date,
            requested,
            variable_states: Vec::new(),
            decision_points: Vec::new(),
            formula_breakdown: Vec::new(),
            execution_path: Vec::new(),
            outputs: BTreeMap::new(),
            error: None,
        }
    }

    pub fn variable(&self, name: &str) -> Option<&VariableState> {
        self.variable_states.iter().find(|v| v.name == name)
    }
}

/// Writes JSON with object keys sorted at every level and no insignificant
/// whitespace. Decimals are strings, so their scale is preserved as written.
pub fn canonical_json<T: Serialize>(value: &T) -> Vec<u8> {
    // serde_json::Value keeps object keys in a BTreeMap, which sorts them.
    let tree = serde_json::to_value(value).expect("trail types always serialize");
    serde_json::to_vec(&tree).expect("a JSON tree always serializes")
}

pub fn canonical_serialize(trail: &AuditTrail) -> Vec<u8> {
    canonical_json(trail)
}
