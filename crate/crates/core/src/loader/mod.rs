//! Reading contract files and checking them before anything is evaluated.

mod graph;
mod scope;
mod validate;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use graph::DependencyGraph;
pub use validate::{codes, validate_contract};

use crate::model::{Clause, ContractDefinition, ModelError, ValueType, VariableDecl, DACL_VERSION};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// One validation finding.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Finding {
    pub code: String,
    pub message: String,
    /// Slash-separated location, e.g. `clauses/2/brackets/4`.
    pub path: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.code, self.path, self.message)
    }
}

/// Errors block loading; warnings never do.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<Finding>,
    pub warnings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_deployable(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn error_codes(&self) -> Vec<&str> {
        self.errors.iter().map(|f| f.code.as_str()).collect()
    }

    pub fn warning_codes(&self) -> Vec<&str> {
        self.warnings.iter().map(|f| f.code.as_str()).collect()
    }

    pub fn has_error(&self, code: &str) -> bool {
        self.errors.iter().any(|f| f.code == code)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LoadError {
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error("contract failed validation with {} error(s)", .0.errors.len())]
    Invalid(ValidationReport),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("dependency cycle: {}", .0.join(" -> "))]
pub struct CyclicDependency(pub Vec<String>);

fn line_column(text: &[u8], offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.iter().filter(|&&b| b == b'\n').count() + 1;
    let column = before.iter().rev().take_while(|&&b| b != b'\n').count() + 1;
    (line, column)
}

fn strip_position(message: String) -> String {
    match message.rfind(" at line ") {
        Some(i) => message[..i].to_string(),
        None => message,
    }
}

/// Reads a contract file. Only the structure is checked here.
pub fn parse_contract(text: &[u8]) -> Result<ContractDefinition, ParseError> {
    let def: ContractDefinition = serde_json::from_slice(text).map_err(|e| ParseError {
        line: e.line(),
        column: e.column(),
        message: strip_position(e.to_string()),
    })?;
    if def.dacl_version != DACL_VERSION {
        let key = b"\"dacl_version\"";
        let offset = text.windows(key.len()).position(|w| w == key).unwrap_or(0);
        let (line, column) = line_column(text, offset);
        return Err(ParseError {
            line,
            column,
            message: format!(
                "unsupported dacl_version '{}' (this engine reads version {DACL_VERSION})",
                def.dacl_version
            ),
        });
    }
    Ok(def)
}

/// Topological order of variables, clauses and procedure locals
/// (`clause.step`, `clause.target`). Readers come after what they read.
pub fn dependency_graph(def: &ContractDefinition) -> Result<Vec<String>, CyclicDependency> {
    DependencyGraph::build(def).topological_order().map_err(CyclicDependency)
}

/// A contract that passed validation, with lookup tables for evaluation.
#[derive(Debug, Clone)]
pub struct Contract {
    definition: ContractDefinition,
    variables: BTreeMap<String, usize>,
    versions: BTreeMap<String, Vec<usize>>,
    order: Vec<String>,
    graph: DependencyGraph,
    output_types: BTreeMap<String, ValueType>,
}

impl Contract {
    /// Validates and indexes a definition. Fails with the report when it has errors.
    pub fn new(definition: ContractDefinition) -> Result<(Contract, ValidationReport), ValidationReport> {
        let report = validate_contract(&definition);
        if !report.is_deployable() {
            return Err(report);
        }
        let graph = DependencyGraph::build(&definition);
        let order = graph
            .topological_order()
            .expect("validation rejects dependency cycles");
        let variables = definition
            .variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.clone(), i))
            .collect();
        let mut versions = BTreeMap::new();
        for name in definition.clause_names() {
            let chain = definition.version_chain(name).expect("name taken from the contract");
            let indices = chain
                .iter()
                .map(|c| {
                    definition
                        .clauses
                        .iter()
                        .position(|d| std::ptr::eq(d, *c))
                        .expect("clause from this definition")
                })
                .collect();
            versions.insert(name.to_string(), indices);
        }
        let output_types = validate::output_types(&definition);
        Ok((
            Contract {
                definition,
                variables,
                versions,
                order,
                graph,
                output_types,
            },
            report,
        ))
    }

    pub fn definition(&self) -> &ContractDefinition {
        &self.definition
    }

    pub fn id(&self) -> &str {
        &self.definition.contract_id
    }

    pub fn variable(&self, name: &str) -> Option<&VariableDecl> {
        self.variables.get(name).map(|&i| &self.definition.variables[i])
    }

    pub fn has_clause(&self, name: &str) -> bool {
        self.versions.contains_key(name)
    }

    /// Clause names in declaration order.
    pub fn clause_names(&self) -> Vec<&str> {
        self.definition.clause_names()
    }

    /// Versions oldest first, with their index in the file.
    pub fn versions(&self, name: &str) -> Result<Vec<(usize, &Clause)>, ModelError> {
        self.versions
            .get(name)
            .map(|idx| idx.iter().map(|&i| (i, &self.definition.clauses[i])).collect())
            .ok_or_else(|| ModelError::UnknownClause(name.to_string()))
    }

    pub fn topological_order(&self) -> &[String] {
        &self.order
    }

    pub fn graph(&self) -> &DependencyGraph {
        &self.graph
    }

    /// Clauses whose output `name` reads, directly or through other clauses.
    pub fn clause_dependencies(&self, name: &str) -> Vec<&str> {
        self.graph
            .transitive_reads(name)
            .into_iter()
            .filter(|n| self.has_clause(n))
            .collect()
    }

    pub fn output_type(&self, clause: &str) -> Option<ValueType> {
        self.output_types.get(clause).copied()
    }
}

/// Parses, validates and indexes a contract file.
pub fn load_contract(text: &[u8]) -> Result<(Contract, ValidationReport), LoadError> {
    let def = parse_contract(text)?;
    Contract::new(def).map_err(LoadError::Invalid)
}
