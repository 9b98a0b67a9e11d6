//! Sandboxed formula and condition evaluation.
//!
//! An [`Expr`] can only be built from literals, variable references, the five
//! arithmetic operators and the whitelisted [`Function`]s. Variable lookup goes
//! through a [`Resolver`]; there is no other way for an expression to observe
//! the world.

mod ast;
mod condition;
mod eval;
mod parser;

use std::collections::BTreeMap;

use thiserror::Error;

pub use ast::{BinaryOp, Expr, Function, Span};
pub use condition::{compare, evaluate_condition, evaluate_condition_into, AtomRecord, DecisionRecord, OperandValue};
pub use eval::{evaluate_expression, evaluate_unrounded, FormulaStepRecord};
pub use parser::parse_expression;

use crate::model::{Value, VariableSource};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("syntax error at position {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("function '{function}' not whitelisted")]
    SandboxViolation { function: String },
    #[error("variable '{name}' is not bound")]
    MissingVariable { name: String },
    #[error("{message}")]
    TypeMismatch { message: String },
    #[error("{message}")]
    Arithmetic { message: String },
}

/// Supplies variable values to the evaluator.
pub trait Resolver {
    type Error: From<ExprError>;

    fn resolve(&mut self, name: &str) -> Result<Value, Self::Error>;
}

/// A plain name → value map with the origin of every entry.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Bindings {
    values: BTreeMap<String, Value>,
    provenance: BTreeMap<String, VariableSource>,
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Value, source: VariableSource) {
        let name = name.into();
        self.provenance.insert(name.clone(), source);
        self.values.insert(name, value);
    }

    /// Shorthand for external decimals, mostly for tests.
    pub fn with_decimals<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let mut b = Bindings::new();
        for (name, value) in pairs {
            b.insert(name, Value::decimal(value), VariableSource::External);
        }
        b
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.values.get(name)
    }

    pub fn source(&self, name: &str) -> Option<VariableSource> {
        self.provenance.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.values.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl Resolver for Bindings {
    type Error = ExprError;

    fn resolve(&mut self, name: &str) -> Result<Value, ExprError> {
        self.values
            .get(name)
            .cloned()
            .ok_or_else(|| ExprError::MissingVariable { name: name.to_string() })
    }
}
