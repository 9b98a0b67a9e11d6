//! In-memory representation of a contract: variable schema, the four clause
//! primitives, conditions, brackets, formulas and validity windows.
//!
//! Types here only enforce what the file format can express structurally.
//! Cross-cutting rules (overlaps, references, cycles) belong to the loader.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::decimal::{Decimal, RoundingMode};
use crate::expr::{parse_expression, Expr, ExprError};

pub const DACL_VERSION: &str = "1";

/// Deepest `all`/`any` nesting a condition may have.
pub const MAX_CONDITION_DEPTH: usize = 32;

/// True for names matching `[a-z][a-z0-9_]*`.
pub fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    chars.next().is_some_and(|c| c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueType {
    Decimal,
    Text,
    Date,
    Boolean,
}

impl ValueType {
    pub fn as_str(self) -> &'static str {
        match self {
            ValueType::Decimal => "decimal",
            ValueType::Text => "text",
            ValueType::Date => "date",
            ValueType::Boolean => "boolean",
        }
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A runtime value. Serialized with an explicit type tag: `{"decimal": "1.50"}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Value {
    Decimal(Decimal),
    Text(String),
    Date(NaiveDate),
    Boolean(bool),
}

impl Value {
    pub fn value_type(&self) -> ValueType {
        match self {
            Value::Decimal(_) => ValueType::Decimal,
            Value::Text(_) => ValueType::Text,
            Value::Date(_) => ValueType::Date,
            Value::Boolean(_) => ValueType::Boolean,
        }
    }

    pub fn as_decimal(&self) -> Option<&Decimal> {
        match self {
            Value::Decimal(d) => Some(d),
            _ => None,
        }
    }

    pub fn text(s: impl Into<String>) -> Value {
        Value::Text(s.into())
    }

    pub fn decimal(s: &str) -> Value {
        Value::Decimal(s.parse().expect("valid decimal literal"))
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Decimal(d) => write!(f, "{d}"),
            Value::Text(s) => f.write_str(s),
            Value::Date(d) => write!(f, "{}", d.format("%Y-%m-%d")),
            Value::Boolean(b) => write!(f, "{b}"),
        }
    }
}

/// A fact as it arrived, before coercion against the schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RawValue {
    Text(String),
    /// Numeric literal text, exactly as written in the input document.
    Number(String),
    Boolean(bool),
    Null,
}

impl RawValue {
    pub fn kind(&self) -> &'static str {
        match self {
            RawValue::Text(_) => "string",
            RawValue::Number(_) => "number",
            RawValue::Boolean(_) => "boolean",
            RawValue::Null => "null",
        }
    }
}

impl fmt::Display for RawValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RawValue::Text(s) | RawValue::Number(s) => f.write_str(s),
            RawValue::Boolean(b) => write!(f, "{b}"),
            RawValue::Null => f.write_str("null"),
        }
    }
}

impl From<&str> for RawValue {
    fn from(s: &str) -> Self {
        RawValue::Text(s.to_string())
    }
}

impl From<String> for RawValue {
    fn from(s: String) -> Self {
        RawValue::Text(s)
    }
}

impl From<bool> for RawValue {
    fn from(b: bool) -> Self {
        RawValue::Boolean(b)
    }
}

impl Serialize for RawValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            RawValue::Text(s) => serializer.serialize_str(s),
            RawValue::Number(s) => serde_json::Number::from_str(s)
                .map_err(serde::ser::Error::custom)?
                .serialize(serializer),
            RawValue::Boolean(b) => serializer.serialize_bool(*b),
            RawValue::Null => serializer.serialize_unit(),
        }
    }
}

impl<'de> Deserialize<'de> for RawValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        match serde_json::Value::deserialize(deserializer)? {
            serde_json::Value::String(s) => Ok(RawValue::Text(s)),
            serde_json::Value::Number(n) => Ok(RawValue::Number(n.to_string())),
            serde_json::Value::Bool(b) => Ok(RawValue::Boolean(b)),
            serde_json::Value::Null => Ok(RawValue::Null),
            other => Err(serde::de::Error::custom(format!(
                "fact values must be strings, numbers or booleans, got {}",
                if other.is_array() { "an array" } else { "an object" }
            ))),
        }
    }
}

pub type Facts = BTreeMap<String, RawValue>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableSource {
    External,
    Const,
    Derived,
}

impl VariableSource {
    pub fn as_str(self) -> &'static str {
        match self {
            VariableSource::External => "external",
            VariableSource::Const => "const",
            VariableSource::Derived => "derived",
        }
    }
}

/// One entry of a time-varying constant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstWindow {
    pub value: Value,
    pub start_date: NaiveDate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_date: Option<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableDecl {
    pub name: String,
    pub source: VariableSource,
    #[serde(rename = "type")]
    pub value_type: ValueType,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enum_values: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub const_value: Option<Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub const_validity: Vec<ConstWindow>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Operand {
    Var(String),
    Literal(Value),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OperandRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    var: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    decimal: Option<Decimal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    date: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    boolean: Option<bool>,
}

impl Serialize for Operand {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut repr = OperandRepr {
            var: None,
            decimal: None,
            text: None,
            date: None,
            boolean: None,
        };
        match self.clone() {
            Operand::Var(v) => repr.var = Some(v),
            Operand::Literal(Value::Decimal(d)) => repr.decimal = Some(d),
            Operand::Literal(Value::Text(t)) => repr.text = Some(t),
            Operand::Literal(Value::Date(d)) => repr.date = Some(d),
            Operand::Literal(Value::Boolean(b)) => repr.boolean = Some(b),
        }
        repr.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Operand {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let r = OperandRepr::deserialize(deserializer)?;
        let mut found = Vec::new();
        if let Some(v) = r.var {
            found.push(Operand::Var(v));
        }
        if let Some(d) = r.decimal {
            found.push(Operand::Literal(Value::Decimal(d)));
        }
        if let Some(t) = r.text {
            found.push(Operand::Literal(Value::Text(t)));
        }
        if let Some(d) = r.date {
            found.push(Operand::Literal(Value::Date(d)));
        }
        if let Some(b) = r.boolean {
            found.push(Operand::Literal(Value::Boolean(b)));
        }
        if found.len() != 1 {
            return Err(serde::de::Error::custom(
                "an operand needs exactly one of 'var', 'decimal', 'text', 'date', 'boolean'",
            ));
        }
        Ok(found.pop().expect("one operand"))
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Var(v) => f.write_str(v),
            Operand::Literal(Value::Text(t)) => write!(f, "\"{t}\""),
            Operand::Literal(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn is_ordering(self) -> bool {
        matches!(self, CmpOp::Lt | CmpOp::Le | CmpOp::Gt | CmpOp::Ge)
    }

    pub fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            CmpOp::Eq => ord == Equal,
            CmpOp::Ne => ord != Equal,
            CmpOp::Lt => ord == Less,
            CmpOp::Le => ord != Greater,
            CmpOp::Gt => ord == Greater,
            CmpOp::Ge => ord != Less,
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for CmpOp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "=" | "==" => CmpOp::Eq,
            "!=" | "≠" | "<>" => CmpOp::Ne,
            "<" => CmpOp::Lt,
            "<=" | "≤" => CmpOp::Le,
            ">" => CmpOp::Gt,
            ">=" | "≥" => CmpOp::Ge,
            other => return Err(format!("unknown comparison operator '{other}'")),
        })
    }
}

impl Serialize for CmpOp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.symbol())
    }
}

impl<'de> Deserialize<'de> for CmpOp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Comparison {
    pub lhs: Operand,
    pub op: CmpOp,
    pub rhs: Operand,
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.op, self.rhs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Condition {
    Atom(Comparison),
    All(Vec<Condition>),
    Any(Vec<Condition>),
}

impl Condition {
    /// Nesting depth; a bare comparison has depth 1.
    pub fn depth(&self) -> usize {
        match self {
            Condition::Atom(_) => 1,
            Condition::All(items) | Condition::Any(items) => {
                1 + items.iter().map(Condition::depth).max().unwrap_or(0)
            }
        }
    }

    pub fn atoms(&self) -> Vec<&Comparison> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Comparison>) {
        match self {
            Condition::Atom(c) => out.push(c),
            Condition::All(items) | Condition::Any(items) => {
                items.iter().for_each(|c| c.collect_atoms(out))
            }
        }
    }
}

impl Serialize for Condition {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        match self {
            Condition::Atom(c) => c.serialize(serializer),
            Condition::All(items) => {
                let mut map = serializer.serialize_map(Some(1))?;
                map.serialize_entry("all", items)?;
                map.end()
            }
            Condition::Any(items) => {
                let mut map = serializer.serialize_map(Some(1))?;
                map.serialize_entry("any", items)?;
                map.end()
            }
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConditionRepr {
    all: Option<Vec<Condition>>,
    any: Option<Vec<Condition>>,
    lhs: Option<Operand>,
    op: Option<CmpOp>,
    rhs: Option<Operand>,
}

impl<'de> Deserialize<'de> for Condition {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let r = ConditionRepr::deserialize(deserializer)?;
        let atom_fields = r.lhs.is_some() || r.op.is_some() || r.rhs.is_some();
        match (r.all, r.any, atom_fields) {
            (Some(items), None, false) => Ok(Condition::All(items)),
            (None, Some(items), false) => Ok(Condition::Any(items)),
            (None, None, true) => match (r.lhs, r.op, r.rhs) {
                (Some(lhs), Some(op), Some(rhs)) => Ok(Condition::Atom(Comparison { lhs, op, rhs })),
                _ => Err(D::Error::custom("a comparison needs 'lhs', 'op' and 'rhs'")),
            },
            _ => Err(D::Error::custom(
                "a condition is exactly one of {\"all\": [...]}, {\"any\": [...]} or {\"lhs\", \"op\", \"rhs\"}",
            )),
        }
    }
}

/// Formula text together with its parse result. Syntax errors are kept
/// rather than raised so the validator can report them with a location.
#[derive(Clone)]
pub struct Formula {
    text: String,
    parsed: Result<Expr, ExprError>,
}

impl Formula {
    pub fn new(text: impl Into<String>) -> Self {
        let text = text.into();
        let parsed = parse_expression(&text);
        Formula { text, parsed }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn parsed(&self) -> Result<&Expr, &ExprError> {
        self.parsed.as_ref()
    }
}

impl PartialEq for Formula {
    fn eq(&self, other: &Self) -> bool {
        self.text == other.text
    }
}

impl Eq for Formula {}

impl fmt::Debug for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Formula({:?})", self.text)
    }
}

impl Serialize for Formula {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.text)
    }
}

impl<'de> Deserialize<'de> for Formula {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Ok(Formula::new(String::deserialize(deserializer)?))
    }
}

/// What a case or bracket produces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Output {
    Value(Value),
    Formula(Formula),
    /// Stops the enclosing procedure after this value is produced.
    Terminal(Box<Output>),
}

impl Output {
    pub fn is_terminal(&self) -> bool {
        matches!(self, Output::Terminal(_))
    }

    /// The output with any terminal markers removed.
    pub fn inner(&self) -> &Output {
        match self {
            Output::Terminal(inner) => inner.inner(),
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bracket {
    pub min: Decimal,
    pub max: Decimal,
    pub output: Output,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

/// Extends the top bracket: every further `step_size` above its max adds `increment`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AboveTopRule {
    pub step_size: Decimal,
    pub increment: Decimal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RangeClause {
    pub input_variable: String,
    pub brackets: Vec<Bracket>,
    pub default: Option<Output>,
    pub above_top_rule: Option<AboveTopRule>,
    /// Decimal places of the bracket bounds; inferred from them when absent.
    pub boundary_scale: Option<u32>,
}

impl RangeClause {
    pub fn effective_boundary_scale(&self) -> u32 {
        self.boundary_scale.unwrap_or_else(|| {
            self.brackets
                .iter()
                .flat_map(|b| [b.min.scale(), b.max.scale()])
                .max()
                .unwrap_or(0) as u32
        })
    }

    /// `10^-scale`: the distance between tick-adjacent bracket bounds.
    pub fn tick(&self) -> Decimal {
        Decimal::from_parts(1.into(), i64::from(self.effective_boundary_scale()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Case {
    pub when: Condition,
    pub output: Output,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogicalClause {
    pub cases: Vec<Case>,
    pub default: Option<Output>,
    /// Places for formula outputs; 2 when absent.
    pub precision: Option<u32>,
    pub rounding: Option<RoundingMode>,
}

pub const DEFAULT_CASE_PRECISION: u32 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubFormula {
    pub target: String,
    pub expression: Formula,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PricingFormula {
    pub sub_formulas: Vec<SubFormula>,
    /// Empty when the file omitted it; the validator reports that.
    pub result_variable: String,
    pub precision: u32,
    pub rounding: Option<RoundingMode>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepBody {
    Logical(LogicalClause),
    Range(RangeClause),
    Pricing(PricingFormula),
    /// Evaluates another clause (its active version) and uses its output.
    ClauseRef(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcedureStep {
    pub name: String,
    pub body: StepBody,
    pub terminal_on_output: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClauseKind {
    Procedure(Vec<ProcedureStep>),
    Logical(LogicalClause),
    Range(RangeClause),
    Pricing(PricingFormula),
}

impl ClauseKind {
    pub fn tag(&self) -> &'static str {
        match self {
            ClauseKind::Procedure(_) => "procedure",
            ClauseKind::Logical(_) => "logical",
            ClauseKind::Range(_) => "range",
            ClauseKind::Pricing(_) => "pricing",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    pub name: String,
    pub kind: ClauseKind,
    pub validity_start_date: Option<NaiveDate>,
    pub validity_end_date: Option<NaiveDate>,
    pub source_excerpt: String,
}

impl Clause {
    pub fn is_active_on(&self, date: NaiveDate) -> bool {
        self.validity_start_date.is_none_or(|s| s <= date)
            && self.validity_end_date.is_none_or(|e| date <= e)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractDefinition {
    pub dacl_version: String,
    pub contract_id: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
    #[serde(default)]
    pub variables: Vec<VariableDecl>,
    #[serde(default)]
    pub clauses: Vec<Clause>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("variable '{0}' is declared more than once")]
    DuplicateVariable(String),
    #[error("no clause named '{0}'")]
    UnknownClause(String),
}

impl ContractDefinition {
    /// Declarations keyed by name.
    pub fn declared_variables(&self) -> Result<BTreeMap<&str, &VariableDecl>, ModelError> {
        let mut map = BTreeMap::new();
        for decl in &self.variables {
            if map.insert(decl.name.as_str(), decl).is_some() {
                return Err(ModelError::DuplicateVariable(decl.name.clone()));
            }
        }
        Ok(map)
    }

    /// Every version of a clause, oldest first; an absent start date sorts first.
    pub fn version_chain(&self, name: &str) -> Result<Vec<&Clause>, ModelError> {
        let mut chain: Vec<&Clause> = self.clauses.iter().filter(|c| c.name == name).collect();
        if chain.is_empty() {
            return Err(ModelError::UnknownClause(name.to_string()));
        }
        chain.sort_by_key(|c| c.validity_start_date);
        Ok(chain)
    }

    /// Distinct clause names in first-declaration order.
    pub fn clause_names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = Vec::new();
        for c in &self.clauses {
            if !names.contains(&c.name.as_str()) {
                names.push(&c.name);
            }
        }
        names
    }
}

// Clauses and procedure steps share one flat JSON shape: common fields plus
// the fields of whichever `kind` they carry.
#[derive(Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    validity_start_date: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    validity_end_date: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source_excerpt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    terminal_on_output: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    steps: Option<Vec<ProcedureStep>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    clause: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cases: Option<Vec<Case>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    default: Option<Output>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    precision: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rounding: Option<RoundingMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    input_variable: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    brackets: Option<Vec<Bracket>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    above_top_rule: Option<AboveTopRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    boundary_scale: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sub_formulas: Option<Vec<SubFormula>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    result_variable: Option<String>,
}

const CLAUSE_KINDS: &str = "procedure, logical, range, pricing";
const STEP_KINDS: &str = "logical, range, pricing, clause_ref";

impl NodeRepr {
    fn present_fields(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let mut check = |present: bool, name: &'static str| {
            if present {
                out.push(name);
            }
        };
        check(self.validity_start_date.is_some(), "validity_start_date");
        check(self.validity_end_date.is_some(), "validity_end_date");
        check(self.source_excerpt.is_some(), "source_excerpt");
        check(self.terminal_on_output.is_some(), "terminal_on_output");
        check(self.steps.is_some(), "steps");
        check(self.clause.is_some(), "clause");
        check(self.cases.is_some(), "cases");
        check(self.default.is_some(), "default");
        check(self.precision.is_some(), "precision");
        check(self.rounding.is_some(), "rounding");
        check(self.input_variable.is_some(), "input_variable");
        check(self.brackets.is_some(), "brackets");
        check(self.above_top_rule.is_some(), "above_top_rule");
        check(self.boundary_scale.is_some(), "boundary_scale");
        check(self.sub_formulas.is_some(), "sub_formulas");
        check(self.result_variable.is_some(), "result_variable");
        out
    }

    fn reject_foreign(&self, kind: &str, allowed: &[&str]) -> Result<(), String> {
        match self.present_fields().into_iter().find(|f| !allowed.contains(f)) {
            Some(field) => Err(format!("field '{field}' is not allowed for kind '{kind}'")),
            None => Ok(()),
        }
    }

    fn name(&mut self) -> Result<String, String> {
        self.name.take().ok_or_else(|| "missing field 'name'".to_string())
    }

    fn take_kind(&mut self, expected: &str) -> Result<String, String> {
        self.kind
            .take()
            .ok_or_else(|| format!("missing field 'kind' (expected one of: {expected})"))
    }

    fn logical(&mut self) -> Result<LogicalClause, String> {
        Ok(LogicalClause {
            cases: self.cases.take().ok_or("logical clauses need 'cases'")?,
            default: self.default.take(),
            precision: self.precision.take(),
            rounding: self.rounding.take(),
        })
    }

    fn range(&mut self) -> Result<RangeClause, String> {
        Ok(RangeClause {
            input_variable: self
                .input_variable
                .take()
                .ok_or("range clauses need 'input_variable'")?,
            brackets: self.brackets.take().ok_or("range clauses need 'brackets'")?,
            default: self.default.take(),
            above_top_rule: self.above_top_rule.take(),
            boundary_scale: self.boundary_scale.take(),
        })
    }

    fn pricing(&mut self) -> Result<PricingFormula, String> {
        Ok(PricingFormula {
            sub_formulas: self
                .sub_formulas
                .take()
                .ok_or("pricing formulas need 'sub_formulas'")?,
            result_variable: self.result_variable.take().unwrap_or_default(),
            precision: self.precision.take().ok_or("pricing formulas need 'precision'")?,
            rounding: self.rounding.take(),
        })
    }

    fn put_logical(&mut self, l: LogicalClause) {
        self.cases = Some(l.cases);
        self.default = l.default;
        self.precision = l.precision;
        self.rounding = l.rounding;
    }

    fn put_range(&mut self, r: RangeClause) {
        self.input_variable = Some(r.input_variable);
        self.brackets = Some(r.brackets);
        self.default = r.default;
        self.above_top_rule = r.above_top_rule;
        self.boundary_scale = r.boundary_scale;
    }

    fn put_pricing(&mut self, p: PricingFormula) {
        self.sub_formulas = Some(p.sub_formulas);
        self.result_variable = Some(p.result_variable).filter(|r| !r.is_empty());
        self.precision = Some(p.precision);
        self.rounding = p.rounding;
    }
}

const LOGICAL_FIELDS: &[&str] = &["cases", "default", "precision", "rounding"];
const RANGE_FIELDS: &[&str] = &["input_variable", "brackets", "default", "above_top_rule", "boundary_scale"];
const PRICING_FIELDS: &[&str] = &["sub_formulas", "result_variable", "precision", "rounding"];
const CLAUSE_COMMON: &[&str] = &["validity_start_date", "validity_end_date", "source_excerpt"];

fn with_common(common: &[&'static str], specific: &[&'static str]) -> Vec<&'static str> {
    common.iter().chain(specific).copied().collect()
}

impl TryFrom<NodeRepr> for Clause {
    type Error = String;

    fn try_from(mut r: NodeRepr) -> Result<Self, String> {
        let name = r.name()?;
        let tag = r.take_kind(CLAUSE_KINDS)?;
        let specific: &[&str] = match tag.as_str() {
            "procedure" => &["steps"],
            "logical" => LOGICAL_FIELDS,
            "range" => RANGE_FIELDS,
            "pricing" => PRICING_FIELDS,
            other => {
                return Err(format!(
                    "unknown clause kind '{other}' in clause '{name}' (expected one of: {CLAUSE_KINDS})"
                ))
            }
        };
        r.reject_foreign(&tag, &with_common(CLAUSE_COMMON, specific))?;
        let kind = match tag.as_str() {
            "procedure" => ClauseKind::Procedure(r.steps.take().ok_or("procedures need 'steps'")?),
            "logical" => ClauseKind::Logical(r.logical()?),
            "range" => ClauseKind::Range(r.range()?),
            _ => ClauseKind::Pricing(r.pricing()?),
        };
        Ok(Clause {
            name,
            kind,
            validity_start_date: r.validity_start_date,
            validity_end_date: r.validity_end_date,
            source_excerpt: r.source_excerpt.unwrap_or_default(),
        })
    }
}

impl From<Clause> for NodeRepr {
    fn from(c: Clause) -> Self {
        let mut r = NodeRepr {
            name: Some(c.name),
            kind: Some(c.kind.tag().to_string()),
            validity_start_date: c.validity_start_date,
            validity_end_date: c.validity_end_date,
            source_excerpt: Some(c.source_excerpt).filter(|s| !s.is_empty()),
            ..NodeRepr::default()
        };
        match c.kind {
            ClauseKind::Procedure(steps) => r.steps = Some(steps),
            ClauseKind::Logical(l) => r.put_logical(l),
            ClauseKind::Range(g) => r.put_range(g),
            ClauseKind::Pricing(p) => r.put_pricing(p),
        }
        r
    }
}

impl TryFrom<NodeRepr> for ProcedureStep {
    type Error = String;

    fn try_from(mut r: NodeRepr) -> Result<Self, String> {
        let name = r.name()?;
        let tag = r.take_kind(STEP_KINDS)?;
        let specific: &[&str] = match tag.as_str() {
            "logical" => LOGICAL_FIELDS,
            "range" => RANGE_FIELDS,
            "pricing" => PRICING_FIELDS,
            "clause_ref" => &["clause"],
            other => {
                return Err(format!(
                    "unknown step kind '{other}' in step '{name}' (expected one of: {STEP_KINDS})"
                ))
            }
        };
        r.reject_foreign(&tag, &with_common(&["terminal_on_output"], specific))?;
        let body = match tag.as_str() {
            "logical" => StepBody::Logical(r.logical()?),
            "range" => StepBody::Range(r.range()?),
            "pricing" => StepBody::Pricing(r.pricing()?),
            _ => StepBody::ClauseRef(r.clause.take().ok_or("clause_ref steps need 'clause'")?),
        };
        Ok(ProcedureStep {
            name,
            body,
            terminal_on_output: r.terminal_on_output.unwrap_or(false),
        })
    }
}

impl From<ProcedureStep> for NodeRepr {
    fn from(s: ProcedureStep) -> Self {
        let tag = match &s.body {
            StepBody::Logical(_) => "logical",
            StepBody::Range(_) => "range",
            StepBody::Pricing(_) => "pricing",
            StepBody::ClauseRef(_) => "clause_ref",
        };
        let mut r = NodeRepr {
            name: Some(s.name),
            kind: Some(tag.to_string()),
            terminal_on_output: Some(s.terminal_on_output).filter(|t| *t),
            ..NodeRepr::default()
        };
        match s.body {
            StepBody::Logical(l) => r.put_logical(l),
            StepBody::Range(g) => r.put_range(g),
            StepBody::Pricing(p) => r.put_pricing(p),
            StepBody::ClauseRef(c) => r.clause = Some(c),
        }
        r
    }
}

macro_rules! node_serde {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                NodeRepr::from(self.clone()).serialize(serializer)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                <$ty>::try_from(NodeRepr::deserialize(deserializer)?).map_err(serde::de::Error::custom)
            }
        }
    };
}

node_serde!(Clause);
node_serde!(ProcedureStep);
