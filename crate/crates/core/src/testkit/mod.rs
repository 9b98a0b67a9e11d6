//! Event generation, reference oracles and concordance checking for the
//! shipped fixture contracts.

mod concordance;
mod generate;
mod manifest;
mod oracle;

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::engine::EvaluationRequest;
use crate::model::{Facts, Value};

pub use concordance::{concordance, ClauseDiff, ConcordanceError, DiffKind, Verdict};
pub use generate::{generate_events, generate_suite, GenerateError};
pub use manifest::{load_fixture, Domain, Fixture, FixtureError, Manifest};
pub use oracle::{all_oracles, oracle_expected, oracle_for, oracle_values, GoldOracle, OracleGap};

/// One synthetic transaction and, once an oracle has seen it, the values it
/// should produce.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub event_id: String,
    pub contract_id: String,
    pub facts: Facts,
    pub evaluation_date: NaiveDate,
    pub clause_names: Vec<String>,
    #[serde(default)]
    pub narrative: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<BTreeMap<String, Value>>,
}

impl EventRecord {
    pub fn request(&self) -> EvaluationRequest {
        EvaluationRequest {
            clause_names: self.clause_names.clone(),
            facts: self.facts.clone(),
            evaluation_date: self.evaluation_date,
        }
    }
}

/// One JSON object per line.
pub fn write_jsonl(events: &[EventRecord]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("events serialize"));
        out.push('\n');
    }
    out
}
