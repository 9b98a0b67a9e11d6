//! Typed, versioned contract clauses evaluated with exact decimal arithmetic.
//!
//! A contract is parsed by [`loader::parse_contract`], checked by
//! [`loader::validate_contract`], and evaluated by [`engine`] against a set of
//! facts and a date. Every evaluation returns an [`audit::AuditTrail`] that
//! records the inputs, decisions and formulas behind each output. [`testkit`]
//! generates events that reach every decision state and compares the engine
//! with independent reference computations.

pub mod audit;
pub mod decimal;
pub mod engine;
pub mod expr;
pub mod loader;
pub mod model;
pub mod testkit;
