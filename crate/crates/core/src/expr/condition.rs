use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{ExprError, Resolver};
use crate::model::{CmpOp, Comparison, Condition, Operand, Value};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperandValue {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub var: Option<String>,
    pub value: Value,
}

/// One comparison that was actually evaluated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomRecord {
    pub lhs: OperandValue,
    pub op: CmpOp,
    pub rhs: OperandValue,
    pub result: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub atoms: Vec<AtomRecord>,
    pub result: bool,
}

fn describe(v: &Value) -> String {
    match v {
        Value::Text(t) => format!("text '{t}'"),
        other => format!("{} {other}", other.value_type()),
    }
}

/// Compares two values. Ordering needs two decimals or two dates; equality
/// needs two values of the same type. Decimals compare exactly.
pub fn compare(lhs: &Value, op: CmpOp, rhs: &Value) -> Result<bool, ExprError> {
    let ord = match (lhs, rhs) {
        (Value::Decimal(a), Value::Decimal(b)) => a.cmp(b),
        (Value::Date(a), Value::Date(b)) => a.cmp(b),
        (Value::Text(a), Value::Text(b)) if !op.is_ordering() => {
            if a == b { Ordering::Equal } else { Ordering::Less }
        }
        (Value::Boolean(a), Value::Boolean(b)) if !op.is_ordering() => {
            if a == b { Ordering::Equal } else { Ordering::Less }
        }
        _ if lhs.value_type() == rhs.value_type() => {
            return Err(ExprError::TypeMismatch {
                message: format!(
                    "operator {op} needs decimal or date operands, got {} and {}",
                    describe(lhs),
                    describe(rhs)
                ),
            })
        }
        _ => {
            return Err(ExprError::TypeMismatch {
                message: format!("cannot compare {} with {} using {op}", describe(lhs), describe(rhs)),
            })
        }
    };
    Ok(op.holds(ord))
}

fn operand<R: Resolver>(o: &Operand, resolver: &mut R) -> Result<OperandValue, R::Error> {
    Ok(match o {
        Operand::Var(name) => OperandValue {
            var: Some(name.clone()),
            value: resolver.resolve(name)?,
        },
        Operand::Literal(v) => OperandValue {
            var: None,
            value: v.clone(),
        },
    })
}

fn atom<R: Resolver>(c: &Comparison, resolver: &mut R, atoms: &mut Vec<AtomRecord>) -> Result<bool, R::Error> {
    let lhs = operand(&c.lhs, resolver)?;
    let rhs = operand(&c.rhs, resolver)?;
    let result = compare(&lhs.value, c.op, &rhs.value)?;
    atoms.push(AtomRecord {
        lhs,
        op: c.op,
        rhs,
        result,
    });
    Ok(result)
}

/// Evaluates left to right with short-circuiting, appending each evaluated
/// atom to `atoms`. On error, `atoms` holds everything evaluated before it.
pub fn evaluate_condition_into<R: Resolver>(
    cond: &Condition,
    resolver: &mut R,
    atoms: &mut Vec<AtomRecord>,
) -> Result<bool, R::Error> {
    match cond {
        Condition::Atom(c) => atom(c, resolver, atoms),
        Condition::All(items) => {
            for item in items {
                if !evaluate_condition_into(item, resolver, atoms)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Condition::Any(items) => {
            for item in items {
                if evaluate_condition_into(item, resolver, atoms)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
    }
}

pub fn evaluate_condition<R: Resolver>(cond: &Condition, resolver: &mut R) -> Result<(bool, DecisionRecord), R::Error> {
    let mut atoms = Vec::new();
    let result = evaluate_condition_into(cond, resolver, &mut atoms)?;
    Ok((result, DecisionRecord { atoms, result }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Bindings;
    use crate::model::VariableSource;

    fn cond(json: &str) -> Condition {
        serde_json::from_str(json).unwrap()
    }

    fn bindings() -> Bindings {
        let mut b = Bindings::new();
        b.insert("age", Value::decimal("15"), VariableSource::External);
        b.insert("relationship", Value::text("child"), VariableSource::External);
        b
    }

    #[test]
    fn all_records_every_atom_when_true() {
        let c = cond(
            r#"{"all": [{"lhs": {"var": "age"}, "op": "<", "rhs": {"decimal": "18"}},
                        {"lhs": {"var": "relationship"}, "op": "=", "rhs": {"text": "child"}}]}"#,
        );
        let (ok, rec) = evaluate_condition(&c, &mut bindings()).unwrap();
        assert!(ok);
        assert_eq!(rec.atoms.len(), 2);
    }

    #[test]
    fn any_short_circuits_past_errors() {
        let c = cond(
            r#"{"any": [{"lhs": {"var": "age"}, "op": "<", "rhs": {"decimal": "18"}},
                        {"lhs": {"var": "undefined"}, "op": "=", "rhs": {"text": "x"}}]}"#,
        );
        let (ok, rec) = evaluate_condition(&c, &mut bindings()).unwrap();
        assert!(ok);
        assert_eq!(rec.atoms.len(), 1);
        let c = cond(
            r#"{"all": [{"lhs": {"var": "age"}, "op": ">", "rhs": {"decimal": "18"}},
                        {"lhs": {"decimal": "1"}, "op": "<", "rhs": {"text": "x"}}]}"#,
        );
        assert!(!evaluate_condition(&c, &mut bindings()).unwrap().0);
    }

    #[test]
    fn type_confusion_is_rejected() {
        let c = cond(r#"{"lhs": {"decimal": "15"}, "op": "<=", "rhs": {"text": "abc"}}"#);
        let err = evaluate_condition(&c, &mut bindings()).unwrap_err();
        assert_eq!(err.to_string(), "cannot compare decimal 15 with text 'abc' using <=");
        assert!(compare(&Value::text("a"), CmpOp::Lt, &Value::text("b")).is_err());
        assert!(compare(&Value::Boolean(true), CmpOp::Ne, &Value::Boolean(false)).unwrap());
    }

    #[test]
    fn exact_decimal_and_date_ordering() {
        assert!(compare(&Value::decimal("2.099"), CmpOp::Lt, &Value::decimal("2.1")).unwrap());
        assert!(compare(&Value::decimal("2.10"), CmpOp::Eq, &Value::decimal("2.1")).unwrap());
        let d = |s: &str| Value::Date(s.parse().unwrap());
        assert!(compare(&d("2024-06-30"), CmpOp::Lt, &d("2024-07-01")).unwrap());
    }
}
