//! Turning raw facts into typed values against the variable schema.

use chrono::NaiveDate;

use super::{EngineError, ErrorCode, EvaluationRequest};
use crate::audit::{VariableOutcome, VariableState};
use crate::decimal::Decimal;
use crate::expr::Bindings;
use crate::loader::Contract;
use crate::model::{RawValue, Value, ValueType, VariableDecl, VariableSource};

fn type_word(t: ValueType) -> &'static str {
    match t {
        ValueType::Decimal => "a number",
        ValueType::Text => "a string",
        ValueType::Date => "a date",
        ValueType::Boolean => "a boolean",
    }
}

/// JSON numbers may use exponents; decimals in strings may not.
fn number_text(s: &str) -> Option<Decimal> {
    if let Ok(d) = s.parse() {
        return Some(d);
    }
    let (mantissa, exponent) = s.split_once(['e', 'E'])?;
    let exponent: i64 = exponent.strip_prefix('+').unwrap_or(exponent).parse().ok()?;
    if exponent.abs() > 1_000 {
        return None;
    }
    let m: Decimal = mantissa.parse().ok()?;
    let (digits, scale) = m.parts();
    Some(Decimal::from_parts(digits, scale as i64 - exponent))
}

fn iso_date(s: &str) -> Option<NaiveDate> {
    // chrono accepts unpadded fields; insist on the canonical 10-character form.
    if s.len() != 10 {
        return None;
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()
}

fn mismatch(decl: &VariableDecl, raw: &RawValue) -> EngineError {
    EngineError::new(
        ErrorCode::TypeMismatch,
        format!(
            "Variable {} must be {}, got {} '{}'.",
            decl.name,
            type_word(decl.value_type),
            raw.kind(),
            raw
        ),
    )
    .path(format!("facts/{}", decl.name))
    .expected(decl.value_type.as_str())
    .got(format!("{} '{}'", raw.kind(), raw))
}

/// Coerces one fact to its declared type, checking enum membership.
pub fn coerce_value(decl: &VariableDecl, raw: &RawValue) -> Result<Value, EngineError> {
    let value = match (decl.value_type, raw) {
        (ValueType::Decimal, RawValue::Text(s)) => s.parse().ok().map(Value::Decimal),
        (ValueType::Decimal, RawValue::Number(s)) => number_text(s).map(Value::Decimal),
        (ValueType::Date, RawValue::Text(s)) => iso_date(s).map(Value::Date),
        (ValueType::Boolean, RawValue::Boolean(b)) => Some(Value::Boolean(*b)),
        (ValueType::Boolean, RawValue::Text(s)) => match s.as_str() {
            "true" => Some(Value::Boolean(true)),
            "false" => Some(Value::Boolean(false)),
            _ => None,
        },
        (ValueType::Text, RawValue::Text(s)) => Some(Value::Text(s.clone())),
        _ => None,
    };
    let value = value.ok_or_else(|| mismatch(decl, raw))?;
    if let (Some(allowed), Value::Text(s)) = (&decl.enum_values, &value) {
        if !allowed.contains(s) {
            let mut sorted: Vec<&str> = allowed.iter().map(String::as_str).collect();
            sorted.sort_unstable();
            let listing = sorted.join(", ");
            return Err(EngineError::new(
                ErrorCode::InvalidEnum,
                format!("Variable {} has invalid value '{s}'. Valid values: {listing}.", decl.name),
            )
            .path(format!("facts/{}", decl.name))
            .expected(format!("one of: {listing}"))
            .got(s.clone()));
        }
    }
    Ok(value)
}

/// The constant's value on `date`, if any window covers it.
pub fn const_value_on(decl: &VariableDecl, date: NaiveDate) -> Option<&Value> {
    if let Some(v) = &decl.const_value {
        return Some(v);
    }
    decl.const_validity
        .iter()
        .find(|w| w.start_date <= date && w.end_date.is_none_or(|e| date <= e))
        .map(|w| &w.value)
}

fn state(decl: Option<&VariableDecl>, name: &str, raw: Option<RawValue>, value: Option<Value>, outcome: VariableOutcome) -> VariableState {
    VariableState {
        name: name.to_string(),
        source: decl.map_or(VariableSource::External, |d| d.source),
        declared_type: decl.map(|d| d.value_type),
        raw,
        value,
        outcome,
    }
}

/// Coerces every fact, then injects constants in force on the request date.
/// Each fact and constant is recorded in `states`; with `lenient`, undeclared
/// facts become warnings instead of errors.
pub(crate) fn coerce_into(
    contract: &Contract,
    request: &EvaluationRequest,
    lenient: bool,
    states: &mut Vec<VariableState>,
    warnings: &mut Vec<String>,
) -> Result<Bindings, EngineError> {
    let mut bindings = Bindings::new();
    for (name, raw) in &request.facts {
        let Some(decl) = contract.variable(name) else {
            let message = format!("Variable {name} is not declared in contract {}.", contract.id());
            states.push(state(None, name, Some(raw.clone()), None, VariableOutcome::Unknown));
            if lenient {
                warnings.push(message);
                continue;
            }
            return Err(EngineError::new(ErrorCode::UnknownVariable, message)
                .path(format!("facts/{name}"))
                .got(name.clone()));
        };
        if decl.source != VariableSource::External {
            states.push(state(Some(decl), name, Some(raw.clone()), None, VariableOutcome::Unknown));
            let what = match decl.source {
                VariableSource::Const => "is a constant",
                _ => "is computed by the contract",
            };
            return Err(EngineError::new(
                ErrorCode::InvalidRequest,
                format!("Variable {name} {what} and cannot be supplied as a fact."),
            )
            .path(format!("facts/{name}")));
        }
        if *raw == RawValue::Null {
            // An explicit null is the same as leaving the fact out.
            states.push(state(Some(decl), name, Some(RawValue::Null), None, VariableOutcome::Missing));
            continue;
        }
        match coerce_value(decl, raw) {
            Ok(value) => {
                states.push(state(Some(decl), name, Some(raw.clone()), Some(value.clone()), VariableOutcome::Ok));
                bindings.insert(name.clone(), value, VariableSource::External);
            }
            Err(e) => {
                let outcome = if e.code == ErrorCode::InvalidEnum {
                    VariableOutcome::InvalidEnum
                } else {
                    VariableOutcome::TypeMismatch
                };
                states.push(state(Some(decl), name, Some(raw.clone()), None, outcome));
                return Err(e);
            }
        }
    }
    for decl in &contract.definition().variables {
        if decl.source != VariableSource::Const {
            continue;
        }
        match const_value_on(decl, request.evaluation_date) {
            Some(v) => {
                states.push(state(Some(decl), &decl.name, None, Some(v.clone()), VariableOutcome::Ok));
                bindings.insert(decl.name.clone(), v.clone(), VariableSource::Const);
            }
            None => states.push(state(Some(decl), &decl.name, None, None, VariableOutcome::NoActiveConst)),
        }
    }
    Ok(bindings)
}

/// Coerces the request's facts against `contract` and injects constants.
pub fn coerce_facts(contract: &Contract, request: &EvaluationRequest, lenient: bool) -> Result<Bindings, EngineError> {
    coerce_into(contract, request, lenient, &mut Vec::new(), &mut Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decl(json: &str) -> VariableDecl {
        serde_json::from_str(json).unwrap()
    }

    #[test]
    fn numbers_and_strings() {
        let weight = decl(r#"{"name": "weight", "source": "external", "type": "decimal"}"#);
        assert_eq!(coerce_value(&weight, &"0.6".into()).unwrap(), Value::decimal("0.6"));
        assert_eq!(
            coerce_value(&weight, &RawValue::Number("1.5e2".into())).unwrap(),
            Value::Decimal(Decimal::from_parts(150.into(), 0))
        );
        let err = coerce_value(&weight, &"abc".into()).unwrap_err();
        assert_eq!(err.message, "Variable weight must be a number, got string 'abc'.");
        assert_eq!(err.code, ErrorCode::TypeMismatch);
        let err = coerce_value(&weight, &true.into()).unwrap_err();
        assert_eq!(err.message, "Variable weight must be a number, got boolean 'true'.");
    }

    #[test]
    fn enum_violation_lists_sorted_values() {
        let mode = decl(
            r#"{"name": "transport_mode", "source": "external", "type": "text", "enum_values": ["ground", "air"]}"#,
        );
        let err = coerce_value(&mode, &"foo".into()).unwrap_err();
        assert_eq!(err.message, "Variable transport_mode has invalid value 'foo'. Valid values: air, ground.");
        assert_eq!(coerce_value(&mode, &"air".into()).unwrap(), Value::text("air"));
    }

    #[test]
    fn dates_and_booleans() {
        let day = decl(r#"{"name": "service_date", "source": "external", "type": "date"}"#);
        assert!(coerce_value(&day, &"2025-01-17".into()).is_ok());
        assert!(coerce_value(&day, &"2025-1-17".into()).is_err());
        let flag = decl(r#"{"name": "emergency", "source": "external", "type": "boolean"}"#);
        assert_eq!(coerce_value(&flag, &"true".into()).unwrap(), Value::Boolean(true));
        let err = coerce_value(&flag, &"yes".into()).unwrap_err();
        assert_eq!(err.message, "Variable emergency must be a boolean, got string 'yes'.");
    }
}
