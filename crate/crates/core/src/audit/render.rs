//! Plain-text rendering of a trail for people. The JSON form is the record;
//! this text may change between versions.

use std::fmt::Write;

use super::{AuditTrail, DecisionOutcome, DecisionPoint, FormulaEntry, PathEntry, VariableOutcome};
use crate::expr::parse_expression;
use crate::model::{Value, VariableSource};

fn show(v: &Value) -> String {
    match v {
        Value::Text(t) => format!("'{t}'"),
        other => other.to_string(),
    }
}

fn who(clause: &str, step: Option<&str>) -> String {
    match step {
        Some(s) => format!("{clause}.{s}"),
        None => clause.to_string(),
    }
}

/// The expression text with each variable replaced by the value it had.
fn substituted(f: &FormulaEntry) -> String {
    let Ok(expr) = parse_expression(&f.expression) else {
        return f.expression.clone();
    };
    let mut out = String::new();
    let mut at = 0;
    for (name, span) in expr.variable_spans() {
        let Some(input) = f.inputs.iter().find(|i| i.name == name) else {
            continue;
        };
        out.push_str(&f.expression[at..span.start]);
        let text = show(&input.value);
        if text.starts_with('-') {
            let _ = write!(out, "({text})");
        } else {
            out.push_str(&text);
        }
        at = span.end;
    }
    out.push_str(&f.expression[at..]);
    out
}

fn formula_line(out: &mut String, f: &FormulaEntry) {
    let _ = write!(out, "  {}: {} = ", f.target, substituted(f));
    match &f.rounding {
        Some(r) if f.intermediate.to_string() != f.result.to_string() => {
            let _ = writeln!(
                out,
                "{}, rounded {} to {} places = {}",
                f.intermediate, r.mode, r.precision, f.result
            );
        }
        _ => {
            let _ = writeln!(out, "{}", f.result);
        }
    }
}

fn decision_lines(out: &mut String, dp: &DecisionPoint) {
    let name = who(&dp.clause, dp.step.as_deref());
    if let Some(input) = &dp.input {
        let _ = writeln!(
            out,
            "  input {} = {}",
            input.var.as_deref().unwrap_or("?"),
            show(&input.value)
        );
    }
    for a in &dp.atoms {
        let operand = |o: &crate::expr::OperandValue| match &o.var {
            Some(v) => format!("{v} ({})", show(&o.value)),
            None => show(&o.value),
        };
        let _ = writeln!(
            out,
            "  case {}: {} {} {} → {}",
            a.case,
            operand(&a.lhs),
            a.op,
            operand(&a.rhs),
            a.result
        );
    }
    let result = dp.output.as_ref().map(show).unwrap_or_default();
    let terminal = if dp.terminal { " (terminal)" } else { "" };
    let line = match &dp.outcome {
        DecisionOutcome::Bracket { min, max, label, .. } => {
            let shown = label.clone().unwrap_or(result);
            format!("{name}: bracket [{min}, {max}] → {shown}")
        }
        DecisionOutcome::AboveTop {
            top_max,
            steps,
            step_size,
            increment,
            ..
        } => format!("{name}: above top bracket (max {top_max}) by {steps} × {step_size}, +{increment} each → {result}"),
        DecisionOutcome::Case { index, label } => match label {
            Some(l) => format!("{name}: case {index} ({l}) matched → {result}"),
            None => format!("{name}: case {index} matched → {result}"),
        },
        DecisionOutcome::Default => format!("{name}: default → {result}"),
        DecisionOutcome::NoMatch => format!("{name}: nothing matched"),
    };
    let _ = writeln!(out, "  {line}{terminal}");
}

fn header(out: &mut String, n: usize, e: &PathEntry) {
    let window = |d: Option<chrono::NaiveDate>| d.map_or("open".to_string(), |d| d.to_string());
    match &e.step {
        Some(step) => {
            let _ = write!(out, "[{n}] step {}.{step}", e.clause);
            if let Some(r) = &e.reference {
                let _ = write!(out, " (uses clause {r})");
            }
            out.push('\n');
        }
        None => {
            let _ = writeln!(
                out,
                "[{n}] clause {} (version {}, valid {} to {}){}",
                e.clause,
                e.version,
                window(e.window.start),
                window(e.window.end),
                if e.requested { ", requested" } else { "" }
            );
            if let Some(src) = &e.source_excerpt {
                let _ = writeln!(out, "  source: \"{src}\"");
            }
        }
    }
}

/// Human-readable text: the inputs, then one section per execution path
/// entry with its decisions and formulas, then outputs or the error.
pub fn render_trace(trail: &AuditTrail) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "contract {} evaluated on {} for {}",
        trail.contract_id,
        trail.evaluation_date,
        trail.requested.join(", ")
    );
    let inputs: Vec<_> = trail
        .variable_states
        .iter()
        .filter(|v| v.source != VariableSource::Derived)
        .collect();
    if !inputs.is_empty() {
        out.push_str("inputs:\n");
        for v in inputs {
            let value = v.value.as_ref().map(show);
            let _ = match (v.outcome, value) {
                (VariableOutcome::Ok, Some(value)) => writeln!(out, "  {} = {value} ({})", v.name, v.source.as_str()),
                (outcome, _) => writeln!(out, "  {} ({}): {outcome:?}", v.name, v.source.as_str()),
            };
        }
    }
    for (n, entry) in trail.execution_path.iter().enumerate() {
        header(&mut out, n + 1, entry);
        let here = |clause: &str, version: usize, step: &Option<String>| {
            clause == entry.clause && version == entry.version && *step == entry.step
        };
        for f in trail.formula_breakdown.iter().filter(|f| here(&f.clause, f.version, &f.step)) {
            formula_line(&mut out, f);
        }
        for dp in trail.decision_points.iter().filter(|d| here(&d.clause, d.version, &d.step)) {
            decision_lines(&mut out, dp);
        }
        if let Some(v) = &entry.output {
            let stop = if entry.terminated { ", remaining steps skipped" } else { "" };
            let _ = writeln!(out, "  = {}{stop}", show(v));
        }
    }
    if let Some(e) = &trail.error {
        let _ = writeln!(out, "ERROR {}", e.code);
        let _ = writeln!(out, "  message: {}", e.message);
        for (key, value) in [("clause", &e.clause), ("path", &e.path), ("expected", &e.expected), ("got", &e.got)] {
            if let Some(v) = value {
                let _ = writeln!(out, "  {key}: {v}");
            }
        }
    } else if !trail.outputs.is_empty() {
        out.push_str("outputs:\n");
        for (name, v) in &trail.outputs {
            let _ = writeln!(out, "  {name} = {}", show(v));
        }
    }
    out
}
