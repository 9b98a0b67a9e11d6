//! Bridges the hand-coded reference computations to engine values.

use std::collections::BTreeMap;

use dacl_gold::{Facts as GoldFacts, GoldValue};

use super::EventRecord;
use crate::model::{RawValue, Value};

pub use dacl_gold::{all_oracles, oracle_for, GoldOracle, OracleGap};

fn gold_facts(event: &EventRecord) -> GoldFacts {
    event
        .facts
        .iter()
        .filter(|(_, v)| **v != RawValue::Null)
        .map(|(k, v)| (k.clone(), v.to_string()))
        .collect()
}

fn to_value(v: GoldValue) -> Value {
    match v {
        GoldValue::Decimal(d) => Value::Decimal(d.to_string().parse().expect("reference decimals are plain")),
        GoldValue::Text(t) => Value::Text(t),
        GoldValue::Boolean(b) => Value::Boolean(b),
    }
}

/// The oracle's values for the clauses `event` requests.
pub fn oracle_values(oracle: &dyn GoldOracle, event: &EventRecord) -> Result<BTreeMap<String, Value>, OracleGap> {
    if oracle.contract_id() != event.contract_id {
        return Err(OracleGap {
            contract: oracle.contract_id().to_string(),
            message: format!("event {} belongs to contract {}", event.event_id, event.contract_id),
        });
    }
    let values = oracle.evaluate(&gold_facts(event), event.evaluation_date, &event.clause_names)?;
    Ok(values.into_iter().map(|(k, v)| (k, to_value(v))).collect())
}

/// Copies of `events` with `expected` filled in by the oracle.
pub fn oracle_expected(oracle: &dyn GoldOracle, events: &[EventRecord]) -> Result<Vec<EventRecord>, OracleGap> {
    events
        .iter()
        .map(|e| {
            let mut e = e.clone();
            e.expected = Some(oracle_values(oracle, &e)?);
            Ok(e)
        })
        .collect()
}
