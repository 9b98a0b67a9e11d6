//! Load-time rules. Every finding is data; nothing here panics or stops early.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Days, NaiveDate};

use super::graph::DependencyGraph;
use super::scope::{clause_units, resolve, Read, Resolved, Unit};
use super::{Finding, ValidationReport};
use crate::expr::ExprError;
use crate::model::{
    is_identifier, Clause, ClauseKind, Comparison, Condition, ContractDefinition, Formula, LogicalClause,
    Operand, Output, PricingFormula, RangeClause, StepBody, Value, ValueType, VariableDecl, VariableSource,
    MAX_CONDITION_DEPTH,
};

/// Finding codes. Warnings: the three `RANGE_GAP`/`RANGE_UNCOVERED_*` codes.
pub mod codes {
    pub const RANGE_OVERLAP: &str = "RANGE_OVERLAP";
    pub const RANGE_INVERTED: &str = "RANGE_INVERTED";
    pub const RANGE_GAP: &str = "RANGE_GAP";
    pub const RANGE_UNCOVERED_BELOW: &str = "RANGE_UNCOVERED_BELOW";
    pub const RANGE_UNCOVERED_ABOVE: &str = "RANGE_UNCOVERED_ABOVE";
    pub const EMPTY_BRACKETS: &str = "EMPTY_BRACKETS";
    pub const ABOVE_TOP_INVALID: &str = "ABOVE_TOP_INVALID";
    pub const INVALID_OUTPUT: &str = "INVALID_OUTPUT";
    pub const TEMPORAL_GAP: &str = "TEMPORAL_GAP";
    pub const TEMPORAL_OVERLAP: &str = "TEMPORAL_OVERLAP";
    pub const TEMPORAL_INVERTED: &str = "TEMPORAL_INVERTED";
    pub const OPEN_ENDED_CONFLICT: &str = "OPEN_ENDED_CONFLICT";
    pub const UNRESOLVED_REFERENCE: &str = "UNRESOLVED_REFERENCE";
    pub const UNKNOWN_CLAUSE: &str = "UNKNOWN_CLAUSE";
    pub const FORWARD_STEP_REFERENCE: &str = "FORWARD_STEP_REFERENCE";
    pub const FORWARD_REFERENCE: &str = "FORWARD_REFERENCE";
    pub const TYPE_ERROR: &str = "TYPE_ERROR";
    pub const DEPENDENCY_CYCLE: &str = "DEPENDENCY_CYCLE";
    pub const EXPR_SYNTAX: &str = "EXPR_SYNTAX";
    pub const SANDBOX_VIOLATION: &str = "SANDBOX_VIOLATION";
    pub const MISSING_RESULT_VARIABLE: &str = "MISSING_RESULT_VARIABLE";
    pub const EMPTY_FORMULA: &str = "EMPTY_FORMULA";
    pub const DUPLICATE_TARGET: &str = "DUPLICATE_TARGET";
    pub const EMPTY_CASES: &str = "EMPTY_CASES";
    pub const EMPTY_CONDITION: &str = "EMPTY_CONDITION";
    pub const CONDITION_TOO_DEEP: &str = "CONDITION_TOO_DEEP";
    pub const EMPTY_PROCEDURE: &str = "EMPTY_PROCEDURE";
    pub const DUPLICATE_STEP: &str = "DUPLICATE_STEP";
    pub const INVALID_IDENTIFIER: &str = "INVALID_IDENTIFIER";
    pub const DUPLICATE_VARIABLE: &str = "DUPLICATE_VARIABLE";
    pub const NAME_CONFLICT: &str = "NAME_CONFLICT";
    pub const ENUM_NOT_TEXT: &str = "ENUM_NOT_TEXT";
    pub const EMPTY_ENUM: &str = "EMPTY_ENUM";
    pub const DUPLICATE_ENUM_VALUE: &str = "DUPLICATE_ENUM_VALUE";
    pub const ENUM_CONST_INVALID: &str = "ENUM_CONST_INVALID";
    pub const CONST_VALUE_MISSING: &str = "CONST_VALUE_MISSING";
    pub const CONST_VALUE_CONFLICT: &str = "CONST_VALUE_CONFLICT";
    pub const CONST_VALUE_UNEXPECTED: &str = "CONST_VALUE_UNEXPECTED";
    pub const CONST_TYPE_MISMATCH: &str = "CONST_TYPE_MISMATCH";
}

use codes::*;

fn output_type(o: &Output) -> ValueType {
    match o {
        Output::Value(v) => v.value_type(),
        Output::Formula(_) => ValueType::Decimal,
        Output::Terminal(inner) => output_type(inner),
    }
}

/// Infers clause and procedure-local output types; tolerant of cycles.
struct Typer<'a> {
    def: &'a ContractDefinition,
    memo: BTreeMap<String, Option<ValueType>>,
    visiting: BTreeSet<String>,
}

impl<'a> Typer<'a> {
    fn new(def: &'a ContractDefinition) -> Self {
        Typer {
            def,
            memo: BTreeMap::new(),
            visiting: BTreeSet::new(),
        }
    }

    fn clause_type(&mut self, name: &str) -> Option<ValueType> {
        if let Some(t) = self.memo.get(name) {
            return *t;
        }
        if !self.visiting.insert(name.to_string()) {
            return None;
        }
        let def = self.def;
        let t = def
            .clauses
            .iter()
            .filter(|c| c.name == name)
            .find_map(|c| self.kind_type(&c.kind));
        self.visiting.remove(name);
        self.memo.insert(name.to_string(), t);
        t
    }

    fn kind_type(&mut self, kind: &ClauseKind) -> Option<ValueType> {
        match kind {
            ClauseKind::Logical(l) => logical_type(l),
            ClauseKind::Range(r) => range_type(r),
            ClauseKind::Pricing(_) => Some(ValueType::Decimal),
            ClauseKind::Procedure(steps) => steps.last().and_then(|s| self.step_type(&s.body)),
        }
    }

    fn step_type(&mut self, body: &StepBody) -> Option<ValueType> {
        match body {
            StepBody::Logical(l) => logical_type(l),
            StepBody::Range(r) => range_type(r),
            StepBody::Pricing(_) => Some(ValueType::Decimal),
            StepBody::ClauseRef(c) => self.clause_type(c),
        }
    }

    /// Type of a local graph node (`clause.step`, `clause.target`, `clause.step.target`).
    fn local_type(&mut self, node: &str) -> Option<ValueType> {
        let (clause, rest) = node.split_once('.')?;
        if rest.contains('.') {
            return Some(ValueType::Decimal);
        }
        let def = self.def;
        for c in def.clauses.iter().filter(|c| c.name == clause) {
            match &c.kind {
                ClauseKind::Pricing(_) => return Some(ValueType::Decimal),
                ClauseKind::Procedure(steps) => {
                    if let Some(s) = steps.iter().find(|s| s.name == rest) {
                        return self.step_type(&s.body);
                    }
                }
                _ => {}
            }
        }
        None
    }
}

fn logical_type(l: &LogicalClause) -> Option<ValueType> {
    l.cases
        .iter()
        .map(|c| &c.output)
        .chain(l.default.as_ref())
        .map(output_type)
        .next()
}

fn range_type(r: &RangeClause) -> Option<ValueType> {
    r.brackets
        .iter()
        .map(|b| &b.output)
        .chain(r.default.as_ref())
        .map(output_type)
        .next()
}

/// Output type of every clause name whose type can be inferred.
pub(crate) fn output_types(def: &ContractDefinition) -> BTreeMap<String, ValueType> {
    let mut typer = Typer::new(def);
    def.clause_names()
        .into_iter()
        .filter_map(|n| typer.clause_type(n).map(|t| (n.to_string(), t)))
        .collect()
}

struct Window {
    start: Option<NaiveDate>,
    end: Option<NaiveDate>,
    path: String,
}

fn fmt_date(d: Option<NaiveDate>) -> String {
    d.map_or_else(|| "open".to_string(), |d| d.to_string())
}

struct Validator<'a> {
    def: &'a ContractDefinition,
    typer: Typer<'a>,
    vars: BTreeMap<&'a str, &'a VariableDecl>,
    report: ValidationReport,
    seen: BTreeSet<(String, String, String)>,
}

impl<'a> Validator<'a> {
    fn error(&mut self, code: &str, path: impl Into<String>, message: impl Into<String>) {
        let finding = Finding {
            code: code.to_string(),
            message: message.into(),
            path: path.into(),
        };
        let key = (finding.code.clone(), finding.path.clone(), finding.message.clone());
        if self.seen.insert(key) {
            self.report.errors.push(finding);
        }
    }

    fn warning(&mut self, code: &str, path: impl Into<String>, message: impl Into<String>) {
        self.report.warnings.push(Finding {
            code: code.to_string(),
            message: message.into(),
            path: path.into(),
        });
    }

    fn is_clause(&self, name: &str) -> bool {
        self.def.clauses.iter().any(|c| c.name == name)
    }

    fn header(&mut self) {
        if !is_identifier(&self.def.contract_id) {
            let id = self.def.contract_id.clone();
            self.error(
                INVALID_IDENTIFIER,
                "contract_id",
                format!("contract_id '{id}' must match [a-z][a-z0-9_]*"),
            );
        }
    }

    fn produced_names(&self) -> BTreeSet<&'a str> {
        let mut names = BTreeSet::new();
        for c in &self.def.clauses {
            names.insert(c.name.as_str());
            let add_pricing = |p: &'a PricingFormula, names: &mut BTreeSet<&'a str>| {
                names.extend(p.sub_formulas.iter().map(|s| s.target.as_str()));
            };
            match &c.kind {
                ClauseKind::Pricing(p) => add_pricing(p, &mut names),
                ClauseKind::Procedure(steps) => {
                    for s in steps {
                        names.insert(&s.name);
                        if let StepBody::Pricing(p) = &s.body {
                            add_pricing(p, &mut names);
                        }
                    }
                }
                _ => {}
            }
        }
        names
    }

    fn variables(&mut self) {
        let def = self.def;
        let produced = self.produced_names();
        for (i, v) in def.variables.iter().enumerate() {
            let path = format!("variables/{i}");
            let name = v.name.as_str();
            if !is_identifier(name) {
                self.error(
                    INVALID_IDENTIFIER,
                    &path,
                    format!("variable name '{name}' must match [a-z][a-z0-9_]*"),
                );
            }
            if self.vars.insert(name, v).is_some() {
                self.error(DUPLICATE_VARIABLE, &path, format!("variable '{name}' is declared more than once"));
            }
            if let Some(values) = &v.enum_values {
                if v.value_type != ValueType::Text {
                    self.error(
                        ENUM_NOT_TEXT,
                        format!("{path}/enum_values"),
                        format!("enum_values are only allowed on text variables; '{name}' is {}", v.value_type),
                    );
                }
                if values.is_empty() {
                    self.error(EMPTY_ENUM, format!("{path}/enum_values"), format!("enum_values of '{name}' is empty"));
                }
                let mut seen = BTreeSet::new();
                for value in values {
                    if !seen.insert(value) {
                        self.error(
                            DUPLICATE_ENUM_VALUE,
                            format!("{path}/enum_values"),
                            format!("enum value '{value}' of '{name}' is listed twice"),
                        );
                    }
                }
            }
            let has_value = v.const_value.is_some();
            let has_windows = !v.const_validity.is_empty();
            match v.source {
                VariableSource::Const => {
                    if !has_value && !has_windows {
                        self.error(
                            CONST_VALUE_MISSING,
                            &path,
                            format!("const '{name}' needs const_value or const_validity"),
                        );
                    }
                    if has_value && has_windows {
                        self.error(
                            CONST_VALUE_CONFLICT,
                            &path,
                            format!("const '{name}' has both const_value and const_validity"),
                        );
                    }
                    if let Some(value) = &v.const_value {
                        self.const_value(v, value, format!("{path}/const_value"));
                    }
                    for (j, w) in v.const_validity.iter().enumerate() {
                        self.const_value(v, &w.value, format!("{path}/const_validity/{j}/value"));
                    }
                    let windows = v
                        .const_validity
                        .iter()
                        .enumerate()
                        .map(|(j, w)| Window {
                            start: Some(w.start_date),
                            end: w.end_date,
                            path: format!("{path}/const_validity/{j}"),
                        })
                        .collect();
                    self.windows(&format!("const '{name}'"), windows);
                }
                VariableSource::External | VariableSource::Derived => {
                    if has_value || has_windows {
                        self.error(
                            CONST_VALUE_UNEXPECTED,
                            &path,
                            format!("'{name}' is {} but carries a const value", v.source.as_str()),
                        );
                    }
                }
            }
            if v.source == VariableSource::Derived {
                if !produced.contains(name) {
                    self.error(
                        UNRESOLVED_REFERENCE,
                        &path,
                        format!("derived variable '{name}' is not produced by any clause, step or sub-formula"),
                    );
                } else if let Some(t) = self.typer.clause_type(name) {
                    if t != v.value_type {
                        self.error(
                            TYPE_ERROR,
                            &path,
                            format!("'{name}' is declared {} but its clause produces {t}", v.value_type),
                        );
                    }
                }
            } else if self.is_clause(name) {
                self.error(
                    NAME_CONFLICT,
                    &path,
                    format!("'{name}' is both a {} variable and a clause", v.source.as_str()),
                );
            }
        }
    }

    fn const_value(&mut self, v: &VariableDecl, value: &Value, path: String) {
        if value.value_type() != v.value_type {
            self.error(
                CONST_TYPE_MISMATCH,
                path,
                format!("const '{}' is declared {} but its value is {}", v.name, v.value_type, value.value_type()),
            );
            return;
        }
        if let (Some(allowed), Value::Text(t)) = (&v.enum_values, value) {
            if !allowed.contains(t) {
                let mut sorted = allowed.clone();
                sorted.sort();
                self.error(
                    ENUM_CONST_INVALID,
                    path,
                    format!("const '{}' value '{t}' is not one of: {}", v.name, sorted.join(", ")),
                );
            }
        }
    }

    /// Validity windows of one clause name or one time-varying const.
    fn windows(&mut self, subject: &str, windows: Vec<Window>) {
        let mut usable = Vec::new();
        for w in windows {
            if let (Some(s), Some(e)) = (w.start, w.end) {
                if s > e {
                    self.error(
                        TEMPORAL_INVERTED,
                        &w.path,
                        format!("{subject}: window starts {s} after it ends {e}"),
                    );
                    continue;
                }
            }
            usable.push(w);
        }
        if usable.len() < 2 {
            return;
        }
        usable.sort_by_key(|w| w.start);
        let latest_start = usable.last().and_then(|w| w.start);

        let mut open_conflict = vec![false; usable.len()];
        let mut first_open: Option<usize> = None;
        for (i, w) in usable.iter().enumerate() {
            if w.end.is_some() {
                continue;
            }
            if let Some(f) = first_open {
                let msg = format!(
                    "{subject}: windows starting {} and {} both omit an end date",
                    fmt_date(usable[f].start),
                    fmt_date(w.start)
                );
                self.error(OPEN_ENDED_CONFLICT, &w.path, msg);
                open_conflict[i] = true;
                open_conflict[f] = true;
            } else {
                first_open = Some(i);
                if w.start < latest_start {
                    let msg = format!(
                        "{subject}: window starting {} omits an end date but a later window starts {}",
                        fmt_date(w.start),
                        fmt_date(latest_start)
                    );
                    self.error(OPEN_ENDED_CONFLICT, &w.path, msg);
                    open_conflict[i] = true;
                }
            }
        }

        for j in 1..usable.len() {
            for i in 0..j {
                if open_conflict[i] || open_conflict[j] {
                    continue;
                }
                let (a, b) = (&usable[i], &usable[j]);
                let a_before_b_ends = match (a.start, b.end) {
                    (Some(s), Some(e)) => s <= e,
                    _ => true,
                };
                let b_before_a_ends = match (b.start, a.end) {
                    (Some(s), Some(e)) => s <= e,
                    _ => true,
                };
                if a_before_b_ends && b_before_a_ends {
                    let msg = format!(
                        "{subject}: windows [{}, {}] and [{}, {}] are both active on some dates",
                        fmt_date(a.start),
                        fmt_date(a.end),
                        fmt_date(b.start),
                        fmt_date(b.end)
                    );
                    self.error(TEMPORAL_OVERLAP, b.path.clone(), msg);
                }
            }
        }

        let mut covered_to = usable[0].end;
        for w in &usable[1..] {
            if let (Some(end), Some(start)) = (covered_to, w.start) {
                let next = end.checked_add_days(Days::new(1)).unwrap_or(end);
                if start > next {
                    let last_gap = start.checked_sub_days(Days::new(1)).unwrap_or(start);
                    let msg = format!("{subject}: nothing is active from {next} to {last_gap}");
                    self.error(TEMPORAL_GAP, w.path.clone(), msg);
                }
            }
            covered_to = match (covered_to, w.end) {
                (Some(a), Some(b)) => Some(a.max(b)),
                _ => None,
            };
        }
    }

    fn temporal(&mut self) {
        let def = self.def;
        for name in def.clause_names() {
            let windows = def
                .clauses
                .iter()
                .enumerate()
                .filter(|(_, c)| c.name == name)
                .map(|(i, c)| Window {
                    start: c.validity_start_date,
                    end: c.validity_end_date,
                    path: format!("clauses/{i}"),
                })
                .collect();
            self.windows(&format!("clause '{name}'"), windows);
        }
    }

    fn name_type(&mut self, unit: &Unit<'_>, name: &str) -> Option<ValueType> {
        let read = Read {
            name,
            path: String::new(),
            clause_only: false,
        };
        match resolve(self.def, unit, &read) {
            Resolved::Local(node) => self.typer.local_type(&node),
            Resolved::Clause(c) => self.typer.clause_type(&c),
            Resolved::Variable(v) => self.vars.get(v.as_str()).map(|d| d.value_type),
            Resolved::Forward { .. } | Resolved::Unresolved => None,
        }
    }

    fn references(&mut self, units: &[Unit<'_>], clause: &Clause) {
        for unit in units {
            for read in &unit.reads {
                let name = read.name;
                match resolve(self.def, unit, read) {
                    Resolved::Unresolved if read.clause_only => self.error(
                        UNKNOWN_CLAUSE,
                        &read.path,
                        format!("step of '{}' refers to unknown clause '{name}'", clause.name),
                    ),
                    Resolved::Unresolved => {
                        let derived = self
                            .vars
                            .get(name)
                            .is_some_and(|v| v.source == VariableSource::Derived);
                        let msg = if derived {
                            format!("'{name}' is a derived variable that is not in scope here")
                        } else {
                            format!("'{name}' is not a declared variable, a clause, or an earlier step")
                        };
                        self.error(UNRESOLVED_REFERENCE, &read.path, msg);
                    }
                    Resolved::Forward { step: true } => self.error(
                        FORWARD_STEP_REFERENCE,
                        &read.path,
                        format!("'{name}' is read before the step that computes it"),
                    ),
                    Resolved::Forward { step: false } => self.error(
                        FORWARD_REFERENCE,
                        &read.path,
                        format!("'{name}' is read before the sub-formula that computes it"),
                    ),
                    Resolved::Local(_) | Resolved::Clause(_) | Resolved::Variable(_) => {}
                }
            }
        }
    }

    fn formula(&mut self, f: &Formula, unit: &Unit<'_>, path: &str) {
        match f.parsed() {
            Err(ExprError::SandboxViolation { function }) => self.error(
                SANDBOX_VIOLATION,
                path,
                format!("function '{function}' not whitelisted in '{}'", f.text()),
            ),
            Err(e) => self.error(EXPR_SYNTAX, path, format!("{e} in '{}'", f.text())),
            Ok(expr) => {
                for name in expr.variables() {
                    if let Some(t) = self.name_type(unit, name) {
                        if t != ValueType::Decimal {
                            self.error(
                                TYPE_ERROR,
                                path,
                                format!("'{name}' is {t}, but formulas only operate on decimals"),
                            );
                        }
                    }
                }
            }
        }
    }

    fn operand_type(&mut self, o: &Operand, unit: &Unit<'_>) -> Option<ValueType> {
        match o {
            Operand::Var(name) => self.name_type(unit, name),
            Operand::Literal(v) => Some(v.value_type()),
        }
    }

    fn enum_check(&mut self, var: &Operand, lit: &Operand, unit: &Unit<'_>, path: &str) {
        let (Operand::Var(name), Operand::Literal(Value::Text(t))) = (var, lit) else {
            return;
        };
        let read = Read {
            name,
            path: String::new(),
            clause_only: false,
        };
        if !matches!(resolve(self.def, unit, &read), Resolved::Variable(_)) {
            return;
        }
        let Some(allowed) = self.vars.get(name.as_str()).and_then(|v| v.enum_values.clone()) else {
            return;
        };
        if !allowed.contains(t) {
            let mut sorted = allowed;
            sorted.sort();
            self.error(
                TYPE_ERROR,
                path,
                format!("'{t}' can never equal {name}; valid values: {}", sorted.join(", ")),
            );
        }
    }

    fn atom(&mut self, c: &Comparison, unit: &Unit<'_>, path: &str) {
        let lt = self.operand_type(&c.lhs, unit);
        let rt = self.operand_type(&c.rhs, unit);
        if let (Some(a), Some(b)) = (lt, rt) {
            if c.op.is_ordering() {
                if a != b || !matches!(a, ValueType::Decimal | ValueType::Date) {
                    self.error(
                        TYPE_ERROR,
                        path,
                        format!("'{c}': operator {} needs two decimals or two dates, got {a} and {b}", c.op),
                    );
                }
            } else if a != b {
                self.error(TYPE_ERROR, path, format!("'{c}': cannot compare {a} with {b}"));
            }
        }
        self.enum_check(&c.lhs, &c.rhs, unit, path);
        self.enum_check(&c.rhs, &c.lhs, unit, path);
    }

    fn condition(&mut self, cond: &Condition, unit: &Unit<'_>, path: &str) {
        match cond {
            Condition::Atom(c) => self.atom(c, unit, path),
            Condition::All(items) | Condition::Any(items) => {
                let key = if matches!(cond, Condition::All(_)) { "all" } else { "any" };
                if items.is_empty() {
                    self.error(EMPTY_CONDITION, path, format!("'{key}' has no conditions"));
                }
                for (i, c) in items.iter().enumerate() {
                    self.condition(c, unit, &format!("{path}/{key}/{i}"));
                }
            }
        }
    }

    fn output(&mut self, o: &Output, unit: &Unit<'_>, path: &str, formulas_allowed: bool) {
        match o {
            Output::Value(_) => {}
            Output::Formula(f) => {
                if formulas_allowed {
                    self.formula(f, unit, &format!("{path}/formula"));
                } else {
                    self.error(INVALID_OUTPUT, path, "bracket outputs must be values, not formulas");
                }
            }
            Output::Terminal(inner) => self.output(inner, unit, &format!("{path}/terminal"), formulas_allowed),
        }
    }

    fn consistent_outputs<'o>(&mut self, outputs: impl Iterator<Item = (&'o Output, String)>) {
        let mut first: Option<ValueType> = None;
        for (o, path) in outputs {
            let t = output_type(o);
            match first {
                None => first = Some(t),
                Some(f) if f != t => {
                    self.error(TYPE_ERROR, path, format!("output is {t} but earlier outputs are {f}"));
                }
                Some(_) => {}
            }
        }
    }

    fn logical(&mut self, l: &LogicalClause, unit: &Unit<'_>, path: &str) {
        if l.cases.is_empty() {
            self.error(EMPTY_CASES, path, "logical clause has no cases");
        }
        for (i, case) in l.cases.iter().enumerate() {
            let when = format!("{path}/cases/{i}/when");
            let depth = case.when.depth();
            if depth > MAX_CONDITION_DEPTH {
                self.error(
                    CONDITION_TOO_DEEP,
                    &when,
                    format!("condition nests {depth} levels; the limit is {MAX_CONDITION_DEPTH}"),
                );
                continue;
            }
            self.condition(&case.when, unit, &when);
            self.output(&case.output, unit, &format!("{path}/cases/{i}/output"), true);
        }
        if let Some(d) = &l.default {
            self.output(d, unit, &format!("{path}/default"), true);
        }
        let outputs = l
            .cases
            .iter()
            .enumerate()
            .map(|(i, c)| (&c.output, format!("{path}/cases/{i}/output")))
            .chain(l.default.iter().map(|d| (d, format!("{path}/default"))));
        self.consistent_outputs(outputs);
    }

    fn range(&mut self, r: &RangeClause, unit: &Unit<'_>, path: &str) {
        if let Some(t) = self.name_type(unit, &r.input_variable) {
            if t != ValueType::Decimal {
                self.error(
                    TYPE_ERROR,
                    format!("{path}/input_variable"),
                    format!("range input '{}' is {t}; brackets need a decimal", r.input_variable),
                );
            }
        }
        if r.brackets.is_empty() {
            self.error(EMPTY_BRACKETS, path, "range clause has no brackets");
            return;
        }
        let mut ok = Vec::new();
        for (i, b) in r.brackets.iter().enumerate() {
            let bpath = format!("{path}/brackets/{i}");
            if b.min > b.max {
                self.error(
                    RANGE_INVERTED,
                    &bpath,
                    format!("bracket [{}, {}] has min greater than max", b.min, b.max),
                );
            } else {
                ok.push(i);
            }
            self.output(&b.output, unit, &format!("{bpath}/output"), false);
        }
        if let Some(d) = &r.default {
            self.output(d, unit, &format!("{path}/default"), false);
        }
        for (x, &j) in ok.iter().enumerate() {
            for &i in &ok[..x] {
                let (a, b) = (&r.brackets[i], &r.brackets[j]);
                if a.min <= b.max && b.min <= a.max {
                    self.error(
                        RANGE_OVERLAP,
                        format!("{path}/brackets/{j}"),
                        format!(
                            "bracket {j} [{}, {}] overlaps bracket {i} [{}, {}]",
                            b.min, b.max, a.min, a.max
                        ),
                    );
                }
            }
        }
        let mut sorted = ok.clone();
        sorted.sort_by(|&i, &j| r.brackets[i].min.cmp(&r.brackets[j].min));
        if r.default.is_none() {
            if let Some(&low) = sorted.first() {
                let min = &r.brackets[low].min;
                self.warning(
                    RANGE_UNCOVERED_BELOW,
                    format!("{path}/brackets/{low}"),
                    format!("inputs below {min} match no bracket and there is no default"),
                );
            }
            let tick = r.tick();
            for pair in sorted.windows(2) {
                let (a, b) = (&r.brackets[pair[0]], &r.brackets[pair[1]]);
                if b.min > a.max {
                    let step = b.min.checked_sub(&a.max).expect("bounded operands");
                    if step > tick {
                        self.warning(
                            RANGE_GAP,
                            format!("{path}/brackets/{}", pair[1]),
                            format!("inputs between {} and {} match no bracket and there is no default", a.max, b.min),
                        );
                    }
                }
            }
            if r.above_top_rule.is_none() {
                if let Some(&top) = sorted.iter().max_by(|&&i, &&j| r.brackets[i].max.cmp(&r.brackets[j].max)) {
                    let max = &r.brackets[top].max;
                    self.warning(
                        RANGE_UNCOVERED_ABOVE,
                        format!("{path}/brackets/{top}"),
                        format!("inputs above {max} match no bracket and there is no default or above-top rule"),
                    );
                }
            }
        }
        if let Some(rule) = &r.above_top_rule {
            let rpath = format!("{path}/above_top_rule");
            if rule.step_size <= crate::decimal::Decimal::zero() {
                self.error(ABOVE_TOP_INVALID, &rpath, format!("step_size must be positive, got {}", rule.step_size));
            }
            if let Some(&top) = sorted.iter().max_by(|&&i, &&j| r.brackets[i].max.cmp(&r.brackets[j].max)) {
                if !matches!(r.brackets[top].output, Output::Value(Value::Decimal(_))) {
                    self.error(
                        ABOVE_TOP_INVALID,
                        &rpath,
                        format!("the top bracket (index {top}) must output a plain decimal for the rule to extend it"),
                    );
                }
            }
        }
        let outputs = r
            .brackets
            .iter()
            .enumerate()
            .map(|(i, b)| (&b.output, format!("{path}/brackets/{i}/output")))
            .chain(r.default.iter().map(|d| (d, format!("{path}/default"))));
        self.consistent_outputs(outputs);
    }

    fn pricing(&mut self, p: &PricingFormula, units: &[Unit<'_>], prefix: &str, path: &str) {
        if p.sub_formulas.is_empty() {
            self.error(EMPTY_FORMULA, path, "pricing formula has no sub_formulas");
        }
        let mut targets = BTreeSet::new();
        for (j, sf) in p.sub_formulas.iter().enumerate() {
            let spath = format!("{path}/sub_formulas/{j}");
            if !is_identifier(&sf.target) {
                self.error(
                    INVALID_IDENTIFIER,
                    format!("{spath}/target"),
                    format!("target '{}' must match [a-z][a-z0-9_]*", sf.target),
                );
            }
            if !targets.insert(sf.target.as_str()) {
                self.error(DUPLICATE_TARGET, format!("{spath}/target"), format!("target '{}' is assigned twice", sf.target));
            }
            let node = format!("{prefix}.{}", sf.target);
            if let Some(unit) = units.iter().find(|u| u.node == node) {
                self.formula(&sf.expression, unit, &format!("{spath}/expression"));
            }
        }
        if p.result_variable.is_empty() {
            self.error(MISSING_RESULT_VARIABLE, path, "pricing formula has no result_variable");
        } else if !targets.contains(p.result_variable.as_str()) {
            self.error(
                MISSING_RESULT_VARIABLE,
                format!("{path}/result_variable"),
                format!("result_variable '{}' is not the target of any sub-formula", p.result_variable),
            );
        }
    }

    fn clause(&mut self, index: usize, clause: &Clause) {
        let path = format!("clauses/{index}");
        if !is_identifier(&clause.name) {
            self.error(
                INVALID_IDENTIFIER,
                &path,
                format!("clause name '{}' must match [a-z][a-z0-9_]*", clause.name),
            );
        }
        let units = clause_units(clause, index);
        self.references(&units, clause);
        let own = units.last().expect("a clause always yields its own unit").clone();
        match &clause.kind {
            ClauseKind::Logical(l) => self.logical(l, &own, &path),
            ClauseKind::Range(r) => self.range(r, &own, &path),
            ClauseKind::Pricing(p) => self.pricing(p, &units, &clause.name, &path),
            ClauseKind::Procedure(steps) => {
                if steps.is_empty() {
                    self.error(EMPTY_PROCEDURE, &path, "procedure has no steps");
                }
                let mut names = BTreeSet::new();
                for (i, step) in steps.iter().enumerate() {
                    let spath = format!("{path}/steps/{i}");
                    if !is_identifier(&step.name) {
                        self.error(
                            INVALID_IDENTIFIER,
                            &spath,
                            format!("step name '{}' must match [a-z][a-z0-9_]*", step.name),
                        );
                    }
                    if !names.insert(step.name.as_str()) {
                        self.error(DUPLICATE_STEP, &spath, format!("step name '{}' is used twice", step.name));
                        continue;
                    }
                    let node = format!("{}.{}", clause.name, step.name);
                    let Some(unit) = units.iter().find(|u| u.node == node).cloned() else {
                        continue;
                    };
                    match &step.body {
                        StepBody::Logical(l) => self.logical(l, &unit, &spath),
                        StepBody::Range(r) => self.range(r, &unit, &spath),
                        StepBody::Pricing(p) => self.pricing(p, &units, &node, &spath),
                        StepBody::ClauseRef(_) => {}
                    }
                }
            }
        }
    }

    fn version_types(&mut self) {
        let def = self.def;
        for name in def.clause_names() {
            let mut first: Option<ValueType> = None;
            for (i, c) in def.clauses.iter().enumerate().filter(|(_, c)| c.name == name) {
                let Some(t) = self.typer.kind_type(&c.kind) else { continue };
                match first {
                    None => first = Some(t),
                    Some(f) if f != t => self.error(
                        TYPE_ERROR,
                        format!("clauses/{i}"),
                        format!("this version of '{name}' produces {t} but an earlier version produces {f}"),
                    ),
                    Some(_) => {}
                }
            }
        }
    }

    fn cycles(&mut self) {
        if let Err(cycle) = DependencyGraph::build(self.def).topological_order() {
            let first = &cycle[0];
            let path = match self.def.clauses.iter().position(|c| &c.name == first) {
                Some(i) => format!("clauses/{i}"),
                None => "clauses".to_string(),
            };
            let mut shown = cycle.clone();
            shown.push(first.clone());
            self.error(
                DEPENDENCY_CYCLE,
                path,
                format!("dependency cycle: {}", shown.join(" -> ")),
            );
        }
    }
}

/// Checks every load-time rule. Pure: the same definition gives the same report.
pub fn validate_contract(def: &ContractDefinition) -> ValidationReport {
    let mut v = Validator {
        def,
        typer: Typer::new(def),
        vars: BTreeMap::new(),
        report: ValidationReport::default(),
        seen: BTreeSet::new(),
    };
    v.header();
    v.variables();
    v.temporal();
    for (i, clause) in def.clauses.iter().enumerate() {
        v.clause(i, clause);
    }
    v.version_types();
    v.cycles();
    v.report
}
