//! One evaluation: clause dispatch, lazy clause outputs, and the trail.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;

use super::{select_active_version, EngineError, ErrorCode, EvalOptions};
use crate::audit::{
    AuditTrail, CaseAtom, DecisionKind, DecisionOutcome, DecisionPoint, FormulaEntry, NamedValue, PathEntry,
    RoundingApplied, VariableOutcome, VariableState, Window,
};
use crate::decimal::{Decimal, RoundingMode};
use crate::expr::{evaluate_condition_into, evaluate_expression, evaluate_unrounded, Bindings, OperandValue, Resolver};
use crate::loader::Contract;
use crate::model::{
    Clause, ClauseKind, LogicalClause, Output, PricingFormula, ProcedureStep, RangeClause, StepBody, Value,
    VariableSource, DEFAULT_CASE_PRECISION,
};

/// A computed value and whether it was wrapped as terminal.
#[derive(Debug, Clone)]
pub(crate) struct Produced {
    pub value: Value,
    pub terminal: bool,
}

/// Where a body is being evaluated.
struct Ctx<'a> {
    clause: &'a str,
    version: usize,
    window: Window,
    step: Option<&'a str>,
    path: String,
}

impl Ctx<'_> {
    fn describe(&self) -> String {
        match self.step {
            Some(s) => format!("step {s} of clause {}", self.clause),
            None => format!("clause {}", self.clause),
        }
    }

    fn local_name(&self, target: &str) -> String {
        match self.step {
            Some(s) => format!("{}.{s}.{target}", self.clause),
            None => format!("{}.{target}", self.clause),
        }
    }
}

fn window_of(clause: &Clause) -> Window {
    Window {
        start: clause.validity_start_date,
        end: clause.validity_end_date,
    }
}

pub(crate) struct Session<'c> {
    contract: &'c Contract,
    options: EvalOptions,
    date: NaiveDate,
    bindings: Bindings,
    memo: BTreeMap<String, Produced>,
    active: Vec<String>,
    requested: BTreeSet<String>,
    pub trail: AuditTrail,
}

/// Name lookup for one body: procedure locals first, then clause outputs,
/// then facts and constants.
struct Scoped<'s, 'c> {
    session: &'s mut Session<'c>,
    locals: &'s [(String, Value)],
    clause: &'s str,
}

impl Resolver for Scoped<'_, '_> {
    type Error = EngineError;

    fn resolve(&mut self, name: &str) -> Result<Value, EngineError> {
        if let Some((_, v)) = self.locals.iter().rev().find(|(n, _)| n == name) {
            return Ok(v.clone());
        }
        self.session.global(name, self.clause)
    }
}

fn render_operand(o: &OperandValue) -> String {
    let shown = match &o.value {
        Value::Text(t) => format!("'{t}'"),
        v => v.to_string(),
    };
    match &o.var {
        Some(var) => format!("{var} ({shown})"),
        None => shown,
    }
}

impl<'c> Session<'c> {
    pub fn new(
        contract: &'c Contract,
        options: EvalOptions,
        date: NaiveDate,
        bindings: Bindings,
        requested: BTreeSet<String>,
        trail: AuditTrail,
    ) -> Self {
        Session {
            contract,
            options,
            date,
            bindings,
            memo: BTreeMap::new(),
            active: Vec::new(),
            requested,
            trail,
        }
    }

    fn global(&mut self, name: &str, reader: &str) -> Result<Value, EngineError> {
        if self.contract.has_clause(name) {
            return self.clause_value(name).map(|p| p.value);
        }
        if let Some(v) = self.bindings.get(name) {
            return Ok(v.clone());
        }
        let Some(decl) = self.contract.variable(name) else {
            return Err(EngineError::new(
                ErrorCode::MissingVariable,
                format!("Variable {name} is not declared in contract {}.", self.contract.id()),
            )
            .clause(reader));
        };
        if decl.source == VariableSource::Const {
            return Err(EngineError::new(
                ErrorCode::NoActiveConst,
                format!("Constant {name} has no value in effect on {}.", self.date),
            )
            .clause(reader)
            .expected(format!("a const_validity window covering {}", self.date)));
        }
        let expected = if decl.description.is_empty() {
            format!("Expected: {}.", decl.value_type)
        } else {
            format!("Expected: {} - {}.", decl.value_type, decl.description)
        };
        if !self.trail.variable_states.iter().any(|s| s.name == name) {
            self.trail.variable_states.push(VariableState {
                name: name.to_string(),
                source: decl.source,
                declared_type: Some(decl.value_type),
                raw: None,
                value: None,
                outcome: VariableOutcome::Missing,
            });
        }
        Err(EngineError::new(
            ErrorCode::MissingVariable,
            format!("Variable {name} required for clause {reader}. {expected}"),
        )
        .clause(reader)
        .expected(decl.value_type.as_str())
        .got("nothing"))
    }

    fn record_derived(&mut self, name: String, value: &Value) {
        self.trail.variable_states.push(VariableState {
            name,
            source: VariableSource::Derived,
            declared_type: Some(value.value_type()),
            raw: None,
            value: Some(value.clone()),
            outcome: VariableOutcome::Ok,
        });
    }

    /// The output of clause `name` on the session date, evaluated at most once.
    pub fn clause_value(&mut self, name: &str) -> Result<Produced, EngineError> {
        if let Some(p) = self.memo.get(name) {
            return Ok(p.clone());
        }
        let (index, clause) = select_active_version(self.contract, name, self.date)?;
        self.run_clause(index, clause)
    }

    /// Evaluates one specific version, bypassing date selection.
    pub fn run_clause(&mut self, index: usize, clause: &'c Clause) -> Result<Produced, EngineError> {
        let name = clause.name.as_str();
        if self.active.iter().any(|a| a == name) {
            return Err(EngineError::new(
                ErrorCode::InvalidContract,
                format!("clause {name} depends on its own output"),
            )
            .clause(name));
        }
        let entry = self.trail.execution_path.len();
        self.trail.execution_path.push(PathEntry {
            clause: name.to_string(),
            version: index,
            window: window_of(clause),
            step: None,
            requested: self.requested.contains(name),
            reference: None,
            source_excerpt: (!clause.source_excerpt.is_empty()).then(|| clause.source_excerpt.clone()),
            output: None,
            terminated: false,
        });
        self.active.push(name.to_string());
        let ctx = Ctx {
            clause: name,
            version: index,
            window: window_of(clause),
            step: None,
            path: format!("clauses/{index}"),
        };
        let result = match &clause.kind {
            ClauseKind::Logical(l) => self.logical(&ctx, l, &[]),
            ClauseKind::Range(r) => self.range(&ctx, r, &[]),
            ClauseKind::Pricing(p) => self.pricing(&ctx, p, &[]),
            ClauseKind::Procedure(steps) => self.procedure(&ctx, steps),
        };
        self.active.pop();
        let produced = result?;
        self.trail.execution_path[entry].output = Some(produced.value.clone());
        self.record_derived(name.to_string(), &produced.value);
        self.memo.insert(name.to_string(), produced.clone());
        Ok(produced)
    }

    fn procedure(&mut self, ctx: &Ctx<'_>, steps: &'c [ProcedureStep]) -> Result<Produced, EngineError> {
        let mut locals: Vec<(String, Value)> = Vec::new();
        let mut last = None;
        for (i, step) in steps.iter().enumerate() {
            let step_ctx = Ctx {
                clause: ctx.clause,
                version: ctx.version,
                window: ctx.window,
                step: Some(&step.name),
                path: format!("{}/steps/{i}", ctx.path),
            };
            let entry = self.trail.execution_path.len();
            self.trail.execution_path.push(PathEntry {
                clause: ctx.clause.to_string(),
                version: ctx.version,
                window: ctx.window,
                step: Some(step.name.clone()),
                requested: false,
                reference: match &step.body {
                    StepBody::ClauseRef(target) => Some(target.clone()),
                    _ => None,
                },
                source_excerpt: None,
                output: None,
                terminated: false,
            });
            let produced = match &step.body {
                StepBody::Logical(l) => self.logical(&step_ctx, l, &locals)?,
                StepBody::Range(r) => self.range(&step_ctx, r, &locals)?,
                StepBody::Pricing(p) => self.pricing(&step_ctx, p, &locals)?,
                StepBody::ClauseRef(target) => self
                    .clause_value(target)
                    .map_err(|e| e.within(ctx.clause, &format!("{}/clause", step_ctx.path)))?,
            };
            let stop = produced.terminal && step.terminal_on_output;
            let path_entry = &mut self.trail.execution_path[entry];
            path_entry.output = Some(produced.value.clone());
            path_entry.terminated = stop;
            self.record_derived(format!("{}.{}", ctx.clause, step.name), &produced.value);
            locals.push((step.name.clone(), produced.value.clone()));
            last = Some(produced.value);
            if stop {
                break;
            }
        }
        // The terminal marker stops this procedure only; readers see a plain value.
        Ok(Produced {
            value: last.expect("validation rejects empty procedures"),
            terminal: false,
        })
    }

    fn output(
        &mut self,
        ctx: &Ctx<'_>,
        output: &Output,
        locals: &[(String, Value)],
        target: &str,
        precision: u32,
        rounding: RoundingMode,
    ) -> Result<Produced, EngineError> {
        match output {
            Output::Value(v) => Ok(Produced {
                value: v.clone(),
                terminal: false,
            }),
            Output::Terminal(inner) => {
                let mut p = self.output(ctx, inner, locals, target, precision, rounding)?;
                p.terminal = true;
                Ok(p)
            }
            Output::Formula(f) => {
                let expr = f.parsed().map_err(|e| EngineError::from(e.clone()))?;
                let (result, record) = {
                    let mut r = Scoped {
                        session: self,
                        locals,
                        clause: ctx.clause,
                    };
                    evaluate_expression(expr, &mut r, precision, rounding)?
                };
                self.trail.formula_breakdown.push(FormulaEntry {
                    clause: ctx.clause.to_string(),
                    version: ctx.version,
                    step: ctx.step.map(str::to_string),
                    target: target.to_string(),
                    expression: f.text().to_string(),
                    inputs: record
                        .inputs
                        .into_iter()
                        .map(|(name, value)| NamedValue { name, value })
                        .collect(),
                    precision,
                    mode: rounding,
                    intermediate: record.intermediate,
                    result: result.clone(),
                    rounding: Some(RoundingApplied {
                        precision,
                        mode: rounding,
                    }),
                });
                Ok(Produced {
                    value: Value::Decimal(result),
                    terminal: false,
                })
            }
        }
    }

    fn decision(&mut self, ctx: &Ctx<'_>, kind: DecisionKind, input: Option<OperandValue>, atoms: Vec<CaseAtom>, outcome: DecisionOutcome, produced: Option<&Produced>) {
        self.trail.decision_points.push(DecisionPoint {
            clause: ctx.clause.to_string(),
            version: ctx.version,
            step: ctx.step.map(str::to_string),
            kind,
            input,
            atoms,
            outcome,
            output: produced.map(|p| p.value.clone()),
            terminal: produced.is_some_and(|p| p.terminal),
        });
    }

    fn logical(&mut self, ctx: &Ctx<'_>, l: &'c LogicalClause, locals: &[(String, Value)]) -> Result<Produced, EngineError> {
        let mut atoms = Vec::new();
        let mut chosen = None;
        for (i, case) in l.cases.iter().enumerate() {
            let mut records = Vec::new();
            let result = {
                let mut r = Scoped {
                    session: self,
                    locals,
                    clause: ctx.clause,
                };
                evaluate_condition_into(&case.when, &mut r, &mut records)
            };
            atoms.extend(records.into_iter().map(|a| CaseAtom {
                case: i,
                lhs: a.lhs,
                op: a.op,
                rhs: a.rhs,
                result: a.result,
            }));
            match result {
                Ok(true) => {
                    chosen = Some(i);
                    break;
                }
                Ok(false) => {}
                Err(e) => {
                    self.decision(ctx, DecisionKind::Logical, None, atoms, DecisionOutcome::NoMatch, None);
                    return Err(e.within(ctx.clause, &format!("{}/cases/{i}/when", ctx.path)));
                }
            }
        }
        let precision = l.precision.unwrap_or(DEFAULT_CASE_PRECISION);
        let rounding = l.rounding.unwrap_or(self.options.rounding);
        let (outcome, output, path, target) = match chosen {
            Some(i) => (
                DecisionOutcome::Case {
                    index: i,
                    label: l.cases[i].label.clone(),
                },
                &l.cases[i].output,
                format!("{}/cases/{i}/output", ctx.path),
                format!("case_{i}"),
            ),
            None => match &l.default {
                Some(d) => (DecisionOutcome::Default, d, format!("{}/default", ctx.path), "default".to_string()),
                None => {
                    let evaluated: Vec<String> = atoms
                        .iter()
                        .map(|a| {
                            format!("{} {} {} is {}", render_operand(&a.lhs), a.op, render_operand(&a.rhs), a.result)
                        })
                        .collect();
                    let listing = evaluated.join("; ");
                    self.decision(ctx, DecisionKind::Logical, None, atoms, DecisionOutcome::NoMatch, None);
                    return Err(EngineError::new(
                        ErrorCode::NoMatchingCase,
                        format!(
                            "No case of {} matched and it has no default. Evaluated: {listing}.",
                            ctx.describe()
                        ),
                    )
                    .clause(ctx.clause)
                    .path(format!("{}/cases", ctx.path))
                    .expected("a matching case or a default")
                    .got(listing));
                }
            },
        };
        let produced = self
            .output(ctx, output, locals, &target, precision, rounding)
            .map_err(|e| e.within(ctx.clause, &path))?;
        self.decision(ctx, DecisionKind::Logical, None, atoms, outcome, Some(&produced));
        Ok(produced)
    }

    fn range(&mut self, ctx: &Ctx<'_>, r: &'c RangeClause, locals: &[(String, Value)]) -> Result<Produced, EngineError> {
        let input_path = format!("{}/input_variable", ctx.path);
        let value = {
            let mut res = Scoped {
                session: self,
                locals,
                clause: ctx.clause,
            };
            res.resolve(&r.input_variable)
        }
        .map_err(|e| e.within(ctx.clause, &input_path))?;
        let Value::Decimal(x) = &value else {
            return Err(EngineError::new(
                ErrorCode::TypeMismatch,
                format!(
                    "Range input {} of {} must be a number, got {} '{value}'.",
                    r.input_variable,
                    ctx.describe(),
                    value.value_type()
                ),
            )
            .clause(ctx.clause)
            .path(input_path));
        };
        let x = x.clone();
        let input = Some(OperandValue {
            var: Some(r.input_variable.clone()),
            value: value.clone(),
        });
        let rounding = self.options.rounding;
        let arithmetic = |e: crate::decimal::DecimalError| {
            EngineError::new(ErrorCode::ArithmeticError, format!("{e} in above_top_rule of {}", ctx.describe()))
                .clause(ctx.clause)
                .path(format!("{}/above_top_rule", ctx.path))
        };

        let bracket = r
            .brackets
            .iter()
            .position(|b| b.min <= x && x <= b.max)
            .or_else(|| micro_gap(r, &x));
        if let Some(i) = bracket {
            let b = &r.brackets[i];
            let produced = self
                .output(ctx, &b.output, locals, &format!("bracket_{i}"), DEFAULT_CASE_PRECISION, rounding)
                .map_err(|e| e.within(ctx.clause, &format!("{}/brackets/{i}/output", ctx.path)))?;
            let outcome = DecisionOutcome::Bracket {
                index: i,
                label: b.label.clone(),
                min: b.min.clone(),
                max: b.max.clone(),
            };
            self.decision(ctx, DecisionKind::Range, input, Vec::new(), outcome, Some(&produced));
            return Ok(produced);
        }

        let top = r.brackets.iter().enumerate().max_by(|a, b| a.1.max.cmp(&b.1.max));
        if let (Some(rule), Some((ti, top))) = (&r.above_top_rule, top) {
            if x > top.max {
                let base = top.max.checked_add(&r.tick()).map_err(arithmetic)?;
                let steps = x
                    .checked_sub(&base)
                    .and_then(|d| d.div_floor(&rule.step_size))
                    .and_then(|n| n.checked_add(&Decimal::one()))
                    .map_err(arithmetic)?;
                let top_output = match top.output.inner() {
                    Output::Value(Value::Decimal(d)) => d.clone(),
                    _ => {
                        return Err(EngineError::new(
                            ErrorCode::InvalidContract,
                            format!("top bracket of {} has no decimal output to extrapolate", ctx.describe()),
                        )
                        .clause(ctx.clause)
                        .path(format!("{}/brackets/{ti}/output", ctx.path)))
                    }
                };
                let total = steps
                    .checked_mul(&rule.increment)
                    .and_then(|inc| top_output.checked_add(&inc))
                    .map_err(arithmetic)?;
                let produced = Produced {
                    value: Value::Decimal(total),
                    terminal: top.output.is_terminal(),
                };
                let outcome = DecisionOutcome::AboveTop {
                    top_index: ti,
                    top_max: top.max.clone(),
                    top_output,
                    step_size: rule.step_size.clone(),
                    increment: rule.increment.clone(),
                    steps,
                };
                self.decision(ctx, DecisionKind::Range, input, Vec::new(), outcome, Some(&produced));
                return Ok(produced);
            }
        }

        if let Some(d) = &r.default {
            let produced = self
                .output(ctx, d, locals, "default", DEFAULT_CASE_PRECISION, rounding)
                .map_err(|e| e.within(ctx.clause, &format!("{}/default", ctx.path)))?;
            self.decision(ctx, DecisionKind::Range, input, Vec::new(), DecisionOutcome::Default, Some(&produced));
            return Ok(produced);
        }

        self.decision(ctx, DecisionKind::Range, input, Vec::new(), DecisionOutcome::NoMatch, None);
        Err(EngineError::new(
            ErrorCode::NoMatchingBracket,
            format!(
                "Input {} = {x} matches no bracket of {} and it has no default.",
                r.input_variable,
                ctx.describe()
            ),
        )
        .clause(ctx.clause)
        .path(format!("{}/brackets", ctx.path))
        .expected("a value inside a bracket")
        .got(x.to_string()))
    }

    fn pricing(&mut self, ctx: &Ctx<'_>, p: &'c PricingFormula, locals: &[(String, Value)]) -> Result<Produced, EngineError> {
        let mut scope = locals.to_vec();
        let rounding = p.rounding.unwrap_or(self.options.rounding);
        let mut result: Option<(usize, Decimal)> = None;
        for (j, sf) in p.sub_formulas.iter().enumerate() {
            let path = format!("{}/sub_formulas/{j}/expression", ctx.path);
            let expr = sf
                .expression
                .parsed()
                .map_err(|e| EngineError::from(e.clone()).within(ctx.clause, &path))?;
            let (value, inputs) = {
                let mut r = Scoped {
                    session: self,
                    locals: &scope,
                    clause: ctx.clause,
                };
                evaluate_unrounded(expr, &mut r, p.precision, rounding)
            }
            .map_err(|e| e.within(ctx.clause, &path))?;
            self.trail.formula_breakdown.push(FormulaEntry {
                clause: ctx.clause.to_string(),
                version: ctx.version,
                step: ctx.step.map(str::to_string),
                target: sf.target.clone(),
                expression: sf.expression.text().to_string(),
                inputs: inputs.into_iter().map(|(name, value)| NamedValue { name, value }).collect(),
                precision: p.precision,
                mode: rounding,
                intermediate: value.clone(),
                result: value.clone(),
                rounding: None,
            });
            let local = Value::Decimal(value.clone());
            self.record_derived(ctx.local_name(&sf.target), &local);
            scope.push((sf.target.clone(), local));
            if sf.target == p.result_variable {
                result = Some((self.trail.formula_breakdown.len() - 1, value));
            }
        }
        let (entry, unrounded) = result.expect("validation requires result_variable to be a target");
        let rounded = unrounded.round(p.precision, rounding);
        let record = &mut self.trail.formula_breakdown[entry];
        record.result = rounded.clone();
        record.rounding = Some(RoundingApplied {
            precision: p.precision,
            mode: rounding,
        });
        Ok(Produced {
            value: Value::Decimal(rounded),
            terminal: false,
        })
    }
}

/// A value strictly between two brackets whose bounds are one tick apart
/// belongs to the lower bracket.
fn micro_gap(r: &RangeClause, x: &Decimal) -> Option<usize> {
    let lower = r
        .brackets
        .iter()
        .enumerate()
        .filter(|(_, b)| b.max < *x)
        .max_by(|a, b| a.1.max.cmp(&b.1.max))?;
    let upper = r.brackets.iter().filter(|b| b.min > *x).min_by(|a, b| a.min.cmp(&b.min))?;
    let gap = upper.min.checked_sub(&lower.1.max).ok()?;
    (gap == r.tick()).then_some(lower.0)
}
