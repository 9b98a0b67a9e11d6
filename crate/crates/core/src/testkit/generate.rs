//! Seeded synthetic events aimed at each decision state in turn.
//!
//! For a target state the generator reads the conditions that lead to it
//! (one branch of each `any`), samples facts inside them and the manifest
//! domains, and keeps the first sample the engine actually routes to the
//! target. Earlier cases that would steal the match are handled by that
//! check rather than by solving their negation.

use std::collections::BTreeMap;

use chrono::{Days, NaiveDate};
use num_traits::ToPrimitive;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::manifest::{Domain, Manifest};
use super::EventRecord;
use crate::audit::{declared_states, states_hit, StateId, StateOutcome};
use crate::decimal::{Decimal, RoundingMode};
use crate::engine::{evaluate_clauses, EvalOptions, EvaluationRequest};
use crate::loader::Contract;
use crate::model::{
    Clause, ClauseKind, CmpOp, Condition, Facts, LogicalClause, Operand, RangeClause, RawValue, StepBody, Value,
    ValueType, VariableDecl, VariableSource,
};

const MAX_ATTEMPTS: usize = 2000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenerateError {
    #[error("state {state} was not reached in {attempts} attempts; list it under 'unreachable' in the manifest if no valid input reaches it")]
    UnreachableState { state: String, attempts: usize },
    #[error("the manifest requests clause {0}, which the contract does not have")]
    UnknownClause(String),
    #[error("state {0} belongs to a clause the manifest does not request")]
    NotRequested(String),
    #[error("variable {name}: {message}")]
    Domain { name: String, message: String },
}

/// Where a range input is placed inside its target interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pick {
    Low,
    High,
    Uniform,
}

#[derive(Debug, Clone, Default)]
struct Constraint {
    lo: Option<(Decimal, bool)>,
    hi: Option<(Decimal, bool)>,
    eq: Option<Value>,
    ne: Vec<Value>,
}

impl Constraint {
    fn lower(&mut self, v: Decimal, inclusive: bool) {
        let tighter = match &self.lo {
            None => true,
            Some((cur, cur_inc)) => v > *cur || (v == *cur && !inclusive && *cur_inc),
        };
        if tighter {
            self.lo = Some((v, inclusive));
        }
    }

    fn upper(&mut self, v: Decimal, inclusive: bool) {
        let tighter = match &self.hi {
            None => true,
            Some((cur, cur_inc)) => v < *cur || (v == *cur && !inclusive && *cur_inc),
        };
        if tighter {
            self.hi = Some((v, inclusive));
        }
    }

    /// `var op literal`. Ordering constraints are kept for decimals only.
    fn add(&mut self, op: CmpOp, lit: &Value) {
        match (op, lit) {
            (CmpOp::Eq, v) => self.eq = Some(v.clone()),
            (CmpOp::Ne, v) => self.ne.push(v.clone()),
            (CmpOp::Lt, Value::Decimal(d)) => self.upper(d.clone(), false),
            (CmpOp::Le, Value::Decimal(d)) => self.upper(d.clone(), true),
            (CmpOp::Gt, Value::Decimal(d)) => self.lower(d.clone(), false),
            (CmpOp::Ge, Value::Decimal(d)) => self.lower(d.clone(), true),
            _ => {}
        }
    }
}

type Constraints = BTreeMap<String, Constraint>;

fn flipped(op: CmpOp) -> CmpOp {
    match op {
        CmpOp::Lt => CmpOp::Gt,
        CmpOp::Le => CmpOp::Ge,
        CmpOp::Gt => CmpOp::Lt,
        CmpOp::Ge => CmpOp::Le,
        other => other,
    }
}

/// Constraints from one conjunctive path through `cond`.
fn branch(cond: &Condition, rng: &mut ChaCha8Rng, out: &mut Constraints) {
    match cond {
        Condition::Atom(c) => match (&c.lhs, &c.rhs) {
            (Operand::Var(v), Operand::Literal(lit)) => out.entry(v.clone()).or_default().add(c.op, lit),
            (Operand::Literal(lit), Operand::Var(v)) => out.entry(v.clone()).or_default().add(flipped(c.op), lit),
            _ => {}
        },
        Condition::All(items) => items.iter().for_each(|c| branch(c, rng, out)),
        Condition::Any(items) => {
            if let Some(c) = items.choose(rng) {
                branch(c, rng, out);
            }
        }
    }
}

fn logical_constraints(l: &LogicalClause, outcome: StateOutcome, rng: &mut ChaCha8Rng, out: &mut Constraints) {
    if let StateOutcome::Case(i) = outcome {
        branch(&l.cases[i].when, rng, out);
    }
}

fn range_constraints(r: &RangeClause, outcome: StateOutcome, pick: Pick, out: &mut Constraints) {
    let c = out.entry(r.input_variable.clone()).or_default();
    match outcome {
        StateOutcome::Bracket(i) => {
            let b = &r.brackets[i];
            match pick {
                Pick::Low => c.eq = Some(Value::Decimal(b.min.clone())),
                Pick::High => c.eq = Some(Value::Decimal(b.max.clone())),
                Pick::Uniform => {
                    c.lower(b.min.clone(), true);
                    c.upper(b.max.clone(), true);
                }
            }
        }
        StateOutcome::AboveTop => {
            let Some(top) = r.brackets.iter().map(|b| &b.max).max() else {
                return;
            };
            let first = top.checked_add(&r.tick()).expect("bracket bounds are small");
            if pick == Pick::Uniform {
                c.lower(first, true);
            } else {
                c.eq = Some(Value::Decimal(first));
            }
        }
        _ => {}
    }
}

fn state_constraints(def_clause: &Clause, state: &StateId, pick: Pick, rng: &mut ChaCha8Rng, out: &mut Constraints) {
    match (&def_clause.kind, &state.step) {
        (ClauseKind::Logical(l), None) => logical_constraints(l, state.outcome, rng, out),
        (ClauseKind::Range(r), None) => range_constraints(r, state.outcome, pick, out),
        (ClauseKind::Procedure(steps), Some(name)) => match steps.iter().find(|s| s.name == *name).map(|s| &s.body) {
            Some(StepBody::Logical(l)) => logical_constraints(l, state.outcome, rng, out),
            Some(StepBody::Range(r)) => range_constraints(r, state.outcome, pick, out),
            _ => {}
        },
        _ => {}
    }
}

/// `x` in units of `10^-scale`, rounded by `mode`.
fn units(x: &Decimal, scale: u32, mode: RoundingMode) -> i64 {
    let (m, _) = x.round(scale, mode).parts();
    m.to_i64().expect("domain bounds fit in i64 units")
}

fn sample_decimal(
    name: &str,
    domain: Option<&Domain>,
    c: &Constraint,
    rng: &mut ChaCha8Rng,
) -> Result<Option<Decimal>, GenerateError> {
    if let Some(v) = &c.eq {
        return Ok(v.as_decimal().cloned());
    }
    let domain = domain.filter(|d| d.min.is_some() && d.max.is_some()).ok_or_else(|| GenerateError::Domain {
        name: name.to_string(),
        message: "decimal variables need 'min' and 'max' in the manifest".to_string(),
    })?;
    let bounds = [c.lo.as_ref(), c.hi.as_ref()];
    let scale = bounds
        .iter()
        .flatten()
        .map(|(d, _)| d.scale() as u32)
        .fold(domain.scale, u32::max);
    let at = |u: i64| Decimal::from_parts(u.into(), i64::from(scale));
    let mut lo = units(domain.min.as_ref().expect("checked"), scale, RoundingMode::Ceiling);
    let mut hi = units(domain.max.as_ref().expect("checked"), scale, RoundingMode::Floor);
    if let Some((v, inclusive)) = &c.lo {
        let mut u = units(v, scale, RoundingMode::Ceiling);
        if !inclusive && at(u) == *v {
            u += 1;
        }
        lo = lo.max(u);
    }
    if let Some((v, inclusive)) = &c.hi {
        let mut u = units(v, scale, RoundingMode::Floor);
        if !inclusive && at(u) == *v {
            u -= 1;
        }
        hi = hi.min(u);
    }
    if lo > hi {
        return Ok(None);
    }
    for _ in 0..8 {
        let v = at(rng.gen_range(lo..=hi));
        if !c.ne.contains(&Value::Decimal(v.clone())) {
            return Ok(Some(v));
        }
    }
    Ok(None)
}

fn sample_fact(
    decl: &VariableDecl,
    domain: Option<&Domain>,
    c: &Constraint,
    rng: &mut ChaCha8Rng,
) -> Result<Option<RawValue>, GenerateError> {
    let allowed = |v: &Value| !c.ne.contains(v);
    Ok(match decl.value_type {
        ValueType::Decimal => sample_decimal(&decl.name, domain, c, rng)?.map(|d| RawValue::Text(d.to_string())),
        ValueType::Boolean => {
            let options: Vec<bool> = match &c.eq {
                Some(Value::Boolean(b)) => vec![*b],
                _ => [false, true].into_iter().filter(|b| allowed(&Value::Boolean(*b))).collect(),
            };
            options.choose(rng).map(|b| RawValue::Boolean(*b))
        }
        ValueType::Text => {
            if let Some(Value::Text(t)) = &c.eq {
                return Ok(Some(RawValue::Text(t.clone())));
            }
            let values = match (&decl.enum_values, domain) {
                (Some(e), _) => e.clone(),
                (None, Some(d)) if !d.values.is_empty() => d.values.clone(),
                _ => {
                    return Err(GenerateError::Domain {
                        name: decl.name.clone(),
                        message: "text variables need an enum or 'values' in the manifest".to_string(),
                    })
                }
            };
            let options: Vec<String> = values.into_iter().filter(|v| allowed(&Value::Text(v.clone()))).collect();
            options.choose(rng).map(|t| RawValue::Text(t.clone()))
        }
        ValueType::Date => {
            return Err(GenerateError::Domain {
                name: decl.name.clone(),
                message: "date facts are not generated".to_string(),
            })
        }
    })
}

fn sample_date(clause: &Clause, manifest: &Manifest, rng: &mut ChaCha8Rng) -> Option<NaiveDate> {
    let start = clause.validity_start_date.map_or(manifest.dates.start, |s| s.max(manifest.dates.start));
    let end = clause.validity_end_date.map_or(manifest.dates.end, |e| e.min(manifest.dates.end));
    let span = (end - start).num_days();
    (span >= 0).then(|| start + Days::new(rng.gen_range(0..=span) as u64))
}

fn narrative(contract: &Contract, date: NaiveDate, facts: &Facts, clauses: &[String]) -> String {
    let details: Vec<String> = facts
        .iter()
        .map(|(name, raw)| {
            let what = contract
                .variable(name)
                .map(|d| d.description.as_str())
                .filter(|d| !d.is_empty())
                .unwrap_or(name);
            format!("{what} is {raw}")
        })
        .collect();
    format!("On {date}, work out {}: {}.", clauses.join(" and "), details.join("; "))
}

struct Generator<'a> {
    contract: &'a Contract,
    manifest: &'a Manifest,
    states: Vec<StateId>,
    rng: ChaCha8Rng,
    produced: usize,
}

impl<'a> Generator<'a> {
    fn new(contract: &'a Contract, manifest: &'a Manifest, seed: u64) -> Result<Self, GenerateError> {
        for name in &manifest.request {
            if !contract.has_clause(name) {
                return Err(GenerateError::UnknownClause(name.clone()));
            }
        }
        let states = declared_states(contract.definition())
            .into_iter()
            .filter(|s| !manifest.unreachable.contains(&s.to_string()))
            .collect();
        Ok(Generator {
            contract,
            manifest,
            states,
            rng: ChaCha8Rng::seed_from_u64(seed),
            produced: 0,
        })
    }

    fn clause(&self, state: &StateId) -> &'a Clause {
        &self.contract.definition().clauses[state.version]
    }

    /// One random state of each other requested clause, as active on `date`.
    fn co_targets(&mut self, target: &StateId, date: NaiveDate) -> Vec<StateId> {
        let mut out = Vec::new();
        for name in &self.manifest.request {
            if *name == target.clause {
                continue;
            }
            let candidates: Vec<&StateId> = self
                .states
                .iter()
                .filter(|s| s.clause == *name && self.contract.definition().clauses[s.version].is_active_on(date))
                .collect();
            if let Some(s) = candidates.choose(&mut self.rng) {
                out.push((*s).clone());
            }
        }
        out
    }

    fn attempt(&mut self, target: &StateId, pick: Pick) -> Result<Option<EventRecord>, GenerateError> {
        let Some(date) = sample_date(self.clause(target), self.manifest, &mut self.rng) else {
            return Ok(None);
        };
        let mut constraints = Constraints::new();
        state_constraints(self.clause(target), target, pick, &mut self.rng, &mut constraints);
        for other in self.co_targets(target, date) {
            state_constraints(self.clause(&other), &other, Pick::Uniform, &mut self.rng, &mut constraints);
        }
        let mut facts = Facts::new();
        let none = Constraint::default();
        for decl in &self.contract.definition().variables {
            if decl.source != VariableSource::External {
                continue;
            }
            let c = constraints.get(&decl.name).unwrap_or(&none);
            match sample_fact(decl, self.manifest.domains.get(&decl.name), c, &mut self.rng)? {
                Some(v) => facts.insert(decl.name.clone(), v),
                None => return Ok(None),
            };
        }
        let request = EvaluationRequest {
            clause_names: self.manifest.request.clone(),
            facts,
            evaluation_date: date,
        };
        let Ok(result) = evaluate_clauses(self.contract, &request, &EvalOptions::default()) else {
            return Ok(None);
        };
        let hit = states_hit(&result.trail, self.contract.definition()).is_ok_and(|h| h.contains(target));
        if !hit {
            return Ok(None);
        }
        self.produced += 1;
        Ok(Some(EventRecord {
            event_id: format!("{}-{:04}", self.contract.id(), self.produced),
            contract_id: self.contract.id().to_string(),
            narrative: narrative(self.contract, date, &request.facts, &request.clause_names),
            facts: request.facts,
            evaluation_date: date,
            clause_names: request.clause_names,
            expected: None,
        }))
    }

    fn event(&mut self, target: &StateId, pick: Pick) -> Result<EventRecord, GenerateError> {
        if !self.manifest.request.contains(&target.clause) {
            return Err(GenerateError::NotRequested(target.to_string()));
        }
        for _ in 0..MAX_ATTEMPTS {
            if let Some(e) = self.attempt(target, pick)? {
                return Ok(e);
            }
        }
        Err(GenerateError::UnreachableState {
            state: target.to_string(),
            attempts: MAX_ATTEMPTS,
        })
    }
}

fn is_range_state(s: &StateId) -> bool {
    matches!(s.outcome, StateOutcome::Bracket(_) | StateOutcome::AboveTop)
}

/// `count_per_state` events for every reachable state, plus one event at
/// each end of every bracket and at the first value above the top bracket.
pub fn generate_events(
    contract: &Contract,
    manifest: &Manifest,
    seed: u64,
    count_per_state: usize,
) -> Result<Vec<EventRecord>, GenerateError> {
    let mut g = Generator::new(contract, manifest, seed)?;
    let mut events = Vec::new();
    for state in g.states.clone() {
        let mut picks = Vec::new();
        match state.outcome {
            StateOutcome::Bracket(_) => picks.extend([Pick::Low, Pick::High]),
            StateOutcome::AboveTop => picks.push(Pick::Low),
            _ => {}
        }
        picks.extend(std::iter::repeat_n(Pick::Uniform, count_per_state));
        for pick in picks {
            events.push(g.event(&state, pick)?);
        }
    }
    Ok(events)
}

/// Exactly `total` events, visiting the reachable states round-robin.
/// Range states alternate between interior and boundary inputs across rounds.
pub fn generate_suite(
    contract: &Contract,
    manifest: &Manifest,
    seed: u64,
    total: usize,
) -> Result<Vec<EventRecord>, GenerateError> {
    let mut g = Generator::new(contract, manifest, seed)?;
    let states = g.states.clone();
    let mut events = Vec::with_capacity(total);
    if states.is_empty() {
        return Ok(events);
    }
    for n in 0..total {
        let state = &states[n % states.len()];
        let pick = match (is_range_state(state), (n / states.len()) % 3) {
            (true, 1) => Pick::Low,
            (true, 2) => Pick::High,
            _ => Pick::Uniform,
        };
        events.push(g.event(state, pick)?);
    }
    Ok(events)
}
