use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decimal::Decimal;
use crate::engine::EvaluationResult;
use crate::model::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffKind {
    /// Both decimal, further apart than the tolerance.
    Numeric,
    /// Different non-decimal values, or values of different types.
    Value,
    /// The engine produced nothing for an expected clause.
    MissingOutput,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClauseDiff {
    pub clause: String,
    pub kind: DiffKind,
    pub expected: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actual: Option<Value>,
    /// `actual - expected` for numeric differences.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diff: Option<Decimal>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Match,
    Mismatch(Vec<ClauseDiff>),
}

impl Verdict {
    pub fn is_match(&self) -> bool {
        *self == Verdict::Match
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConcordanceError {
    #[error("nothing is expected, so there is nothing to compare")]
    NoExpectation,
}

/// Compares engine outputs with expected values. Decimals may differ by at
/// most `tolerance`; everything else must be equal.
pub fn concordance(
    result: &EvaluationResult,
    expected: &BTreeMap<String, Value>,
    tolerance: &Decimal,
) -> Result<Verdict, ConcordanceError> {
    if expected.is_empty() {
        return Err(ConcordanceError::NoExpectation);
    }
    let mut diffs = Vec::new();
    for (clause, want) in expected {
        let diff = |kind, actual: Option<&Value>, diff| ClauseDiff {
            clause: clause.clone(),
            kind,
            expected: want.clone(),
            actual: actual.cloned(),
            diff,
        };
        match (result.outputs.get(clause), want) {
            (None, _) => diffs.push(diff(DiffKind::MissingOutput, None, None)),
            (Some(got @ Value::Decimal(a)), Value::Decimal(b)) => {
                let delta = a.checked_sub(b).expect("outputs are bounded");
                if delta.abs() > *tolerance {
                    diffs.push(diff(DiffKind::Numeric, Some(got), Some(delta)));
                }
            }
            (Some(got), want) if got != want => diffs.push(diff(DiffKind::Value, Some(got), None)),
            _ => {}
        }
    }
    Ok(if diffs.is_empty() { Verdict::Match } else { Verdict::Mismatch(diffs) })
}
