use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::ExprError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    MissingVariable,
    TypeMismatch,
    InvalidEnum,
    UnknownVariable,
    NoActiveVersion,
    NoActiveConst,
    NoMatchingCase,
    NoMatchingBracket,
    ArithmeticError,
    SandboxViolation,
    UnknownClause,
    InvalidRequest,
    InvalidContract,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::MissingVariable => "MISSING_VARIABLE",
            ErrorCode::TypeMismatch => "TYPE_MISMATCH",
            ErrorCode::InvalidEnum => "INVALID_ENUM",
            ErrorCode::UnknownVariable => "UNKNOWN_VARIABLE",
            ErrorCode::NoActiveVersion => "NO_ACTIVE_VERSION",
            ErrorCode::NoActiveConst => "NO_ACTIVE_CONST",
            ErrorCode::NoMatchingCase => "NO_MATCHING_CASE",
            ErrorCode::NoMatchingBracket => "NO_MATCHING_BRACKET",
            ErrorCode::ArithmeticError => "ARITHMETIC_ERROR",
            ErrorCode::SandboxViolation => "SANDBOX_VIOLATION",
            ErrorCode::UnknownClause => "UNKNOWN_CLAUSE",
            ErrorCode::InvalidRequest => "INVALID_REQUEST",
            ErrorCode::InvalidContract => "INVALID_CONTRACT",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An evaluation failure, shaped for programs: a stable code, a readable
/// message, and where it happened. Absent fields serialize as `null`.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{message}")]
pub struct EngineError {
    pub code: ErrorCode,
    pub message: String,
    pub clause: Option<String>,
    pub path: Option<String>,
    pub expected: Option<String>,
    pub got: Option<String>,
}

impl EngineError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        EngineError {
            code,
            message: message.into(),
            clause: None,
            path: None,
            expected: None,
            got: None,
        }
    }

    pub fn clause(mut self, clause: impl Into<String>) -> Self {
        self.clause = Some(clause.into());
        self
    }

    pub fn path(mut self, path: impl Into<String>) -> Self {
        self.path = Some(path.into());
        self
    }

    pub fn expected(mut self, expected: impl Into<String>) -> Self {
        self.expected = Some(expected.into());
        self
    }

    pub fn got(mut self, got: impl Into<String>) -> Self {
        self.got = Some(got.into());
        self
    }

    /// Fills clause and path unless something more specific set them already.
    pub(crate) fn within(mut self, clause: &str, path: &str) -> Self {
        if self.clause.is_none() {
            self.clause = Some(clause.to_string());
        }
        if self.path.is_none() {
            self.path = Some(path.to_string());
        }
        self
    }
}

impl From<ExprError> for EngineError {
    fn from(e: ExprError) -> Self {
        let code = match &e {
            ExprError::MissingVariable { .. } => ErrorCode::MissingVariable,
            ExprError::TypeMismatch { .. } => ErrorCode::TypeMismatch,
            ExprError::Arithmetic { .. } => ErrorCode::ArithmeticError,
            ExprError::SandboxViolation { .. } => ErrorCode::SandboxViolation,
            ExprError::Parse { .. } => ErrorCode::InvalidContract,
        };
        EngineError::new(code, e.to_string())
    }
}
