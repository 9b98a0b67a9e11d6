//! Re-checking a trail using nothing but the values recorded in it.

use std::collections::BTreeMap;

use thiserror::Error;

use super::{AuditTrail, DecisionOutcome, FormulaEntry, PathEntry};
use crate::decimal::Decimal;
use crate::expr::{compare, evaluate_unrounded, parse_expression, Bindings};
use crate::model::{Value, VariableSource};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("formula {clause}.{target}: {message}")]
    Formula { clause: String, target: String, message: String },
    #[error("decision in {clause}: {message}")]
    Decision { clause: String, message: String },
    #[error("value of {entry}: {message}")]
    Value { entry: String, message: String },
}

fn replay_formula(f: &FormulaEntry) -> Result<(), ReplayError> {
    let fail = |message: String| ReplayError::Formula {
        clause: f.clause.clone(),
        target: f.target.clone(),
        message,
    };
    let expr = parse_expression(&f.expression).map_err(|e| fail(e.to_string()))?;
    let mut bindings = Bindings::new();
    for input in &f.inputs {
        bindings.insert(input.name.clone(), input.value.clone(), VariableSource::External);
    }
    let (intermediate, _) =
        evaluate_unrounded(&expr, &mut bindings, f.precision, f.mode).map_err(|e| fail(e.to_string()))?;
    if intermediate.to_string() != f.intermediate.to_string() {
        return Err(fail(format!("recomputed {intermediate}, trail says {}", f.intermediate)));
    }
    let result = match &f.rounding {
        Some(r) => intermediate.round(r.precision, r.mode),
        None => intermediate,
    };
    if result.to_string() != f.result.to_string() {
        return Err(fail(format!("rounded to {result}, trail says {}", f.result)));
    }
    Ok(())
}

fn replay_decisions(trail: &AuditTrail) -> Result<(), ReplayError> {
    for dp in &trail.decision_points {
        let fail = |message: String| ReplayError::Decision {
            clause: dp.clause.clone(),
            message,
        };
        for a in &dp.atoms {
            let again = compare(&a.lhs.value, a.op, &a.rhs.value).map_err(|e| fail(e.to_string()))?;
            if again != a.result {
                return Err(fail(format!(
                    "{} {} {} is {again}, trail says {}",
                    a.lhs.value, a.op, a.rhs.value, a.result
                )));
            }
        }
        let x = dp.input.as_ref().and_then(|i| i.value.as_decimal());
        match (&dp.outcome, x) {
            (DecisionOutcome::Bracket { min, max, .. }, Some(x)) => {
                // Above `max` is allowed only inside the one-tick gap to the next bracket.
                let tick = Decimal::from_parts(1.into(), max.scale() as i64);
                let beyond = max.checked_add(&tick).map_err(|e| fail(e.to_string()))?;
                if !(min <= x && *x < beyond) {
                    return Err(fail(format!("input {x} is not in bracket [{min}, {max}]")));
                }
            }
            (
                DecisionOutcome::AboveTop {
                    top_max,
                    top_output,
                    step_size,
                    increment,
                    steps,
                    ..
                },
                Some(x),
            ) => {
                let tick = Decimal::from_parts(1.into(), top_max.scale() as i64);
                let expected_steps = top_max
                    .checked_add(&tick)
                    .and_then(|base| x.checked_sub(&base))
                    .and_then(|d| d.div_floor(step_size))
                    .and_then(|n| n.checked_add(&Decimal::one()))
                    .map_err(|e| fail(e.to_string()))?;
                let total = steps
                    .checked_mul(increment)
                    .and_then(|inc| top_output.checked_add(&inc))
                    .map_err(|e| fail(e.to_string()))?;
                if x <= top_max || expected_steps != *steps {
                    return Err(fail(format!("input {x} does not give {steps} step(s) above {top_max}")));
                }
                if dp.output != Some(Value::Decimal(total.clone())) {
                    return Err(fail(format!("extrapolated value is {total}")));
                }
            }
            (DecisionOutcome::Bracket { .. } | DecisionOutcome::AboveTop { .. }, None) => {
                return Err(fail("range decision without a decimal input".to_string()));
            }
            _ => {}
        }
    }
    Ok(())
}

fn label(e: &PathEntry) -> String {
    match &e.step {
        Some(s) => format!("{}.{s}", e.clause),
        None => e.clause.clone(),
    }
}

/// Rebuilds the value of path entry `i` from decisions and formulas.
fn rebuild(trail: &AuditTrail, i: usize, memo: &mut BTreeMap<usize, Value>) -> Result<Value, ReplayError> {
    if let Some(v) = memo.get(&i) {
        return Ok(v.clone());
    }
    let e = &trail.execution_path[i];
    let fail = |message: String| ReplayError::Value {
        entry: label(e),
        message,
    };
    let same = |clause: &str, version: usize, step: &Option<String>| {
        clause == e.clause && version == e.version && *step == e.step
    };
    let decision = trail
        .decision_points
        .iter()
        .find(|d| same(&d.clause, d.version, &d.step) && d.outcome != DecisionOutcome::NoMatch);
    let value = if let Some(dp) = decision {
        let v = dp.output.clone().ok_or_else(|| fail("decision without an output".to_string()))?;
        if let DecisionOutcome::Case { index, .. } = dp.outcome {
            let target = format!("case_{index}");
            let formula = trail
                .formula_breakdown
                .iter()
                .find(|f| same(&f.clause, f.version, &f.step) && f.target == target);
            if let Some(f) = formula {
                if v != Value::Decimal(f.result.clone()) {
                    return Err(fail(format!("case output {v} differs from its formula result {}", f.result)));
                }
            }
        }
        v
    } else if let Some(f) = trail
        .formula_breakdown
        .iter()
        .find(|f| same(&f.clause, f.version, &f.step) && f.rounding.is_some())
    {
        Value::Decimal(f.result.clone())
    } else if let Some(r) = &e.reference {
        let j = trail
            .execution_path
            .iter()
            .position(|p| p.clause == *r && p.step.is_none())
            .ok_or_else(|| fail(format!("referenced clause {r} never ran")))?;
        rebuild(trail, j, memo)?
    } else if e.step.is_none() {
        let last = trail
            .execution_path
            .iter()
            .enumerate()
            .filter(|(_, p)| p.clause == e.clause && p.version == e.version && p.step.is_some())
            .map(|(j, _)| j)
            .last()
            .ok_or_else(|| fail("nothing in the trail produces this value".to_string()))?;
        rebuild(trail, last, memo)?
    } else {
        return Err(fail("nothing in the trail produces this value".to_string()));
    };
    if let Some(recorded) = &e.output {
        if *recorded != value {
            return Err(fail(format!("rebuilt {value}, trail says {recorded}")));
        }
    }
    memo.insert(i, value.clone());
    Ok(value)
}

/// Re-evaluates every recorded formula and comparison, rebuilds each
/// clause value from them, and returns the rebuilt outputs. Fails at the
/// first record that does not reproduce.
pub fn replay(trail: &AuditTrail) -> Result<BTreeMap<String, Value>, ReplayError> {
    for f in &trail.formula_breakdown {
        replay_formula(f)?;
    }
    replay_decisions(trail)?;
    let mut memo = BTreeMap::new();
    let mut outputs = BTreeMap::new();
    for (name, recorded) in &trail.outputs {
        let i = trail
            .execution_path
            .iter()
            .position(|p| p.clause == *name && p.step.is_none())
            .ok_or_else(|| ReplayError::Value {
                entry: name.clone(),
                message: "output clause is not on the execution path".to_string(),
            })?;
        let value = rebuild(trail, i, &mut memo)?;
        if value != *recorded {
            return Err(ReplayError::Value {
                entry: name.clone(),
                message: format!("rebuilt {value}, output says {recorded}"),
            });
        }
        outputs.insert(name.clone(), value);
    }
    Ok(outputs)
}
