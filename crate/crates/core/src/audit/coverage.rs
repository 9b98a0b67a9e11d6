use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AuditTrail, DecisionOutcome};
use crate::decimal::{Decimal, RoundingMode};
use crate::model::{ClauseKind, ContractDefinition, LogicalClause, RangeClause, StepBody};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateOutcome {
    Case(usize),
    Bracket(usize),
    AboveTop,
    Default,
    /// A clause version with no decisions: evaluating it is its only state.
    Path,
}

/// One decision state: a case, bracket, extrapolation, default, or a
/// decision-free clause version.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StateId {
    pub clause: String,
    pub version: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<String>,
    pub outcome: StateOutcome,
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.clause, self.version)?;
        if let Some(s) = &self.step {
            write!(f, "/{s}")?;
        }
        match self.outcome {
            StateOutcome::Case(i) => write!(f, ":case_{i}"),
            StateOutcome::Bracket(i) => write!(f, ":bracket_{i}"),
            StateOutcome::AboveTop => f.write_str(":above_top"),
            StateOutcome::Default => f.write_str(":default"),
            StateOutcome::Path => f.write_str(":path"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoverageError {
    #[error("trace {index} belongs to contract '{found}', not '{expected}'")]
    ForeignTrace { index: usize, expected: String, found: String },
    #[error("trace {index} mentions clause '{clause}' version {version}, which this contract does not have")]
    UnknownClause { index: usize, clause: String, version: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClauseCoverage {
    pub clause: String,
    pub hit: usize,
    pub total: usize,
    pub missed: Vec<StateId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub contract_id: String,
    pub traces: usize,
    pub clauses: Vec<ClauseCoverage>,
    pub hit: usize,
    pub total: usize,
    /// `hit / total` to four places; zero when there are no states.
    pub fraction: Decimal,
}

impl CoverageReport {
    pub fn is_complete(&self) -> bool {
        self.hit == self.total
    }
}

fn logical_states(out: &mut Vec<StateOutcome>, l: &LogicalClause) {
    out.extend((0..l.cases.len()).map(StateOutcome::Case));
    if l.default.is_some() {
        out.push(StateOutcome::Default);
    }
}

fn range_states(out: &mut Vec<StateOutcome>, r: &RangeClause) {
    out.extend((0..r.brackets.len()).map(StateOutcome::Bracket));
    if r.above_top_rule.is_some() {
        out.push(StateOutcome::AboveTop);
    }
    if r.default.is_some() {
        out.push(StateOutcome::Default);
    }
}

/// Every decision state of every clause version, in file order.
pub fn declared_states(def: &ContractDefinition) -> Vec<StateId> {
    let mut states = Vec::new();
    for (version, clause) in def.clauses.iter().enumerate() {
        let mut here = Vec::new();
        let state = |step: Option<&str>, outcome| StateId {
            clause: clause.name.clone(),
            version,
            step: step.map(str::to_string),
            outcome,
        };
        match &clause.kind {
            ClauseKind::Logical(l) => {
                let mut o = Vec::new();
                logical_states(&mut o, l);
                here.extend(o.into_iter().map(|o| state(None, o)));
            }
            ClauseKind::Range(r) => {
                let mut o = Vec::new();
                range_states(&mut o, r);
                here.extend(o.into_iter().map(|o| state(None, o)));
            }
            ClauseKind::Pricing(_) => {}
            ClauseKind::Procedure(steps) => {
                for step in steps {
                    let mut o = Vec::new();
                    match &step.body {
                        StepBody::Logical(l) => logical_states(&mut o, l),
                        StepBody::Range(r) => range_states(&mut o, r),
                        StepBody::Pricing(_) | StepBody::ClauseRef(_) => {}
                    }
                    here.extend(o.into_iter().map(|o| state(Some(&step.name), o)));
                }
            }
        }
        if here.is_empty() {
            here.push(state(None, StateOutcome::Path));
        }
        states.extend(here);
    }
    states
}

fn hit_states(index: usize, trail: &AuditTrail, def: &ContractDefinition) -> Result<BTreeSet<StateId>, CoverageError> {
    let check = |clause: &str, version: usize| {
        if def.clauses.get(version).is_some_and(|c| c.name == clause) {
            Ok(())
        } else {
            Err(CoverageError::UnknownClause {
                index,
                clause: clause.to_string(),
                version,
            })
        }
    };
    let mut hit = BTreeSet::new();
    for dp in &trail.decision_points {
        check(&dp.clause, dp.version)?;
        let outcome = match dp.outcome {
            DecisionOutcome::Case { index, .. } => StateOutcome::Case(index),
            DecisionOutcome::Bracket { index, .. } => StateOutcome::Bracket(index),
            DecisionOutcome::AboveTop { .. } => StateOutcome::AboveTop,
            DecisionOutcome::Default => StateOutcome::Default,
            DecisionOutcome::NoMatch => continue,
        };
        hit.insert(StateId {
            clause: dp.clause.clone(),
            version: dp.version,
            step: dp.step.clone(),
            outcome,
        });
    }
    for entry in &trail.execution_path {
        check(&entry.clause, entry.version)?;
        if entry.step.is_none() && entry.output.is_some() {
            hit.insert(StateId {
                clause: entry.clause.clone(),
                version: entry.version,
                step: None,
                outcome: StateOutcome::Path,
            });
        }
    }
    Ok(hit)
}

/// The declared decision states one trail reached.
pub fn states_hit(trail: &AuditTrail, def: &ContractDefinition) -> Result<BTreeSet<StateId>, CoverageError> {
    let declared: BTreeSet<StateId> = declared_states(def).into_iter().collect();
    Ok(hit_states(0, trail, def)?.intersection(&declared).cloned().collect())
}

/// Which declared decision states the traces reached, per clause name.
pub fn trace_coverage(traces: &[AuditTrail], def: &ContractDefinition) -> Result<CoverageReport, CoverageError> {
    let mut hit = BTreeSet::new();
    for (i, trail) in traces.iter().enumerate() {
        if trail.contract_id != def.contract_id {
            return Err(CoverageError::ForeignTrace {
                index: i,
                expected: def.contract_id.clone(),
                found: trail.contract_id.clone(),
            });
        }
        hit.extend(hit_states(i, trail, def)?);
    }
    let declared = declared_states(def);
    let mut clauses = Vec::new();
    for name in def.clause_names() {
        let mine: Vec<&StateId> = declared.iter().filter(|s| s.clause == name).collect();
        let missed: Vec<StateId> = mine.iter().filter(|s| !hit.contains(**s)).map(|s| (*s).clone()).collect();
        clauses.push(ClauseCoverage {
            clause: name.to_string(),
            hit: mine.len() - missed.len(),
            total: mine.len(),
            missed,
        });
    }
    let total: usize = clauses.iter().map(|c| c.total).sum();
    let hit_count: usize = clauses.iter().map(|c| c.hit).sum();
    let fraction = if total == 0 {
        Decimal::zero().round(4, RoundingMode::Down)
    } else {
        Decimal::from_i64(hit_count as i64)
            .checked_div(&Decimal::from_i64(total as i64), 4)
            .expect("nonzero divisor")
            .round(4, RoundingMode::Down)
    };
    Ok(CoverageReport {
        contract_id: def.contract_id.clone(),
        traces: traces.len(),
        clauses,
        hit: hit_count,
        total,
        fraction,
    })
}
