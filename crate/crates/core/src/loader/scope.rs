//! Name resolution shared by the validator and the dependency graph.
//!
//! A clause version is flattened into [`Unit`]s: one per value it computes
//! (pricing targets, procedure steps, the clause result). Each unit lists the
//! names it reads and which procedure-local names it may see.

use crate::model::{
    Clause, ClauseKind, Condition, ContractDefinition, Operand, Output, PricingFormula, StepBody,
    VariableSource,
};

/// A name read by a unit, with the location it was read at.
#[derive(Debug, Clone)]
pub(crate) struct Read<'a> {
    pub name: &'a str,
    pub path: String,
    /// Read by a `clause_ref` step: must name a clause.
    pub clause_only: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct Unit<'a> {
    /// Graph node name: `clause`, `clause.local` or `clause.step.target`.
    pub node: String,
    pub reads: Vec<Read<'a>>,
    /// Locals visible to this unit: (name as written, node name).
    pub visible: Vec<(&'a str, String)>,
    /// Locals declared at or after this unit: (name, is a procedure step).
    pub later: Vec<(&'a str, bool)>,
    /// Nodes this unit is assembled from (a step's targets, a clause's steps).
    pub parts: Vec<String>,
}

/// What a name read at some point refers to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Resolved {
    Local(String),
    Clause(String),
    Variable(String),
    /// A step or sub-formula target declared later than the reader.
    Forward { step: bool },
    Unresolved,
}

pub(crate) fn resolve(
    def: &ContractDefinition,
    unit: &Unit<'_>,
    read: &Read<'_>,
) -> Resolved {
    let is_clause = def.clauses.iter().any(|c| c.name == read.name);
    if read.clause_only {
        return if is_clause {
            Resolved::Clause(read.name.to_string())
        } else {
            Resolved::Unresolved
        };
    }
    if let Some((_, node)) = unit.visible.iter().rev().find(|(n, _)| *n == read.name) {
        return Resolved::Local(node.clone());
    }
    if let Some(&(_, step)) = unit.later.iter().find(|(n, _)| *n == read.name) {
        return Resolved::Forward { step };
    }
    if is_clause {
        return Resolved::Clause(read.name.to_string());
    }
    let declared = def
        .variables
        .iter()
        .any(|v| v.name == read.name && v.source != VariableSource::Derived);
    if declared {
        Resolved::Variable(read.name.to_string())
    } else {
        Resolved::Unresolved
    }
}

fn condition_reads<'a>(cond: &'a Condition, path: String, out: &mut Vec<Read<'a>>) {
    match cond {
        Condition::Atom(c) => {
            for (side, operand) in [("lhs", &c.lhs), ("rhs", &c.rhs)] {
                if let Operand::Var(name) = operand {
                    out.push(Read {
                        name,
                        path: format!("{path}/{side}"),
                        clause_only: false,
                    });
                }
            }
        }
        Condition::All(items) | Condition::Any(items) => {
            let key = if matches!(cond, Condition::All(_)) { "all" } else { "any" };
            for (i, c) in items.iter().enumerate() {
                condition_reads(c, format!("{path}/{key}/{i}"), out);
            }
        }
    }
}

fn output_reads<'a>(output: &'a Output, path: String, out: &mut Vec<Read<'a>>) {
    match output {
        Output::Value(_) => {}
        Output::Formula(f) => {
            if let Ok(expr) = f.parsed() {
                for name in expr.variables() {
                    out.push(Read {
                        name,
                        path: format!("{path}/formula"),
                        clause_only: false,
                    });
                }
            }
        }
        Output::Terminal(inner) => output_reads(inner, format!("{path}/terminal"), out),
    }
}

struct Builder<'a> {
    units: Vec<Unit<'a>>,
}

impl<'a> Builder<'a> {
    fn pricing(
        &mut self,
        p: &'a PricingFormula,
        node_prefix: &str,
        path: &str,
        outer_visible: &[(&'a str, String)],
        outer_later: &[(&'a str, bool)],
    ) -> Vec<String> {
        let mut parts = Vec::new();
        for (j, sf) in p.sub_formulas.iter().enumerate() {
            let node = format!("{node_prefix}.{}", sf.target);
            let mut visible = outer_visible.to_vec();
            visible.extend(
                p.sub_formulas[..j]
                    .iter()
                    .map(|e| (e.target.as_str(), format!("{node_prefix}.{}", e.target))),
            );
            let mut later = outer_later.to_vec();
            later.extend(p.sub_formulas[j..].iter().map(|e| (e.target.as_str(), false)));
            let reads = match sf.expression.parsed() {
                Ok(expr) => expr
                    .variables()
                    .into_iter()
                    .map(|name| Read {
                        name,
                        path: format!("{path}/sub_formulas/{j}/expression"),
                        clause_only: false,
                    })
                    .collect(),
                Err(_) => Vec::new(),
            };
            self.units.push(Unit {
                node: node.clone(),
                reads,
                visible,
                later,
                parts: Vec::new(),
            });
            parts.push(node);
        }
        parts
    }

    fn clause(&mut self, clause: &'a Clause, index: usize) {
        let path = format!("clauses/{index}");
        let name = clause.name.as_str();
        let simple = |reads| Unit {
            node: name.to_string(),
            reads,
            visible: Vec::new(),
            later: Vec::new(),
            parts: Vec::new(),
        };
        match &clause.kind {
            ClauseKind::Logical(l) => {
                let mut reads = Vec::new();
                for (i, case) in l.cases.iter().enumerate() {
                    condition_reads(&case.when, format!("{path}/cases/{i}/when"), &mut reads);
                    output_reads(&case.output, format!("{path}/cases/{i}/output"), &mut reads);
                }
                if let Some(d) = &l.default {
                    output_reads(d, format!("{path}/default"), &mut reads);
                }
                self.units.push(simple(reads));
            }
            ClauseKind::Range(r) => {
                self.units.push(simple(vec![Read {
                    name: &r.input_variable,
                    path: format!("{path}/input_variable"),
                    clause_only: false,
                }]));
            }
            ClauseKind::Pricing(p) => {
                let parts = self.pricing(p, name, &path, &[], &[]);
                let mut unit = simple(Vec::new());
                unit.parts = parts;
                self.units.push(unit);
            }
            ClauseKind::Procedure(steps) => {
                let mut step_nodes = Vec::new();
                for (i, step) in steps.iter().enumerate() {
                    let step_path = format!("{path}/steps/{i}");
                    let node = format!("{name}.{}", step.name);
                    let visible: Vec<(&str, String)> = steps[..i]
                        .iter()
                        .map(|s| (s.name.as_str(), format!("{name}.{}", s.name)))
                        .collect();
                    let later: Vec<(&str, bool)> = steps[i..].iter().map(|s| (s.name.as_str(), true)).collect();
                    let mut unit = Unit {
                        node: node.clone(),
                        reads: Vec::new(),
                        visible: visible.clone(),
                        later: later.clone(),
                        parts: Vec::new(),
                    };
                    match &step.body {
                        StepBody::Logical(l) => {
                            for (c, case) in l.cases.iter().enumerate() {
                                condition_reads(&case.when, format!("{step_path}/cases/{c}/when"), &mut unit.reads);
                                output_reads(&case.output, format!("{step_path}/cases/{c}/output"), &mut unit.reads);
                            }
                            if let Some(d) = &l.default {
                                output_reads(d, format!("{step_path}/default"), &mut unit.reads);
                            }
                        }
                        StepBody::Range(r) => unit.reads.push(Read {
                            name: &r.input_variable,
                            path: format!("{step_path}/input_variable"),
                            clause_only: false,
                        }),
                        StepBody::Pricing(p) => {
                            unit.parts = self.pricing(p, &node, &step_path, &visible, &later);
                        }
                        StepBody::ClauseRef(target) => unit.reads.push(Read {
                            name: target,
                            path: format!("{step_path}/clause"),
                            clause_only: true,
                        }),
                    }
                    self.units.push(unit);
                    step_nodes.push(node);
                }
                let mut unit = simple(Vec::new());
                unit.parts = step_nodes;
                self.units.push(unit);
            }
        }
    }
}

/// Units of one clause version, innermost first; the last is the clause itself.
pub(crate) fn clause_units(clause: &Clause, index: usize) -> Vec<Unit<'_>> {
    let mut b = Builder { units: Vec::new() };
    b.clause(clause, index);
    b.units
}
