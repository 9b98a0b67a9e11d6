//! Reference computations for the shipped fixture contracts, written by hand
//! from the contract terms. Nothing here reads a contract file or shares
//! code with the engine; agreement between the two is the point.

mod energy;
mod health;
mod logistics;
mod muni;

use std::collections::BTreeMap;
use std::str::FromStr;

use chrono::NaiveDate;
use rust_decimal::{Decimal, RoundingStrategy};
use thiserror::Error;

pub use energy::EnergySup;
pub use health::HealthPpo;
pub use logistics::LogisticsMsa;
pub use muni::MuniIfb;

/// Facts as the strings an event carries.
pub type Facts = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GoldValue {
    Decimal(Decimal),
    Text(String),
    Boolean(bool),
}

/// An input the contract terms do not price. Seeing one means the fixture
/// or the event generator is wrong.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{contract}: {message}")]
pub struct OracleGap {
    pub contract: String,
    pub message: String,
}

pub trait GoldOracle: Send + Sync {
    fn contract_id(&self) -> &'static str;

    /// Values of the named clauses for these facts on `date`.
    fn evaluate(
        &self,
        facts: &Facts,
        date: NaiveDate,
        clauses: &[String],
    ) -> Result<BTreeMap<String, GoldValue>, OracleGap>;
}

static ORACLES: [&dyn GoldOracle; 4] = [&EnergySup, &MuniIfb, &HealthPpo, &LogisticsMsa];

pub fn all_oracles() -> &'static [&'static dyn GoldOracle] {
    &ORACLES
}

pub fn oracle_for(contract_id: &str) -> Option<&'static dyn GoldOracle> {
    ORACLES.iter().copied().find(|o| o.contract_id() == contract_id)
}

/// Commercial rounding: to `dp` places, ties away from zero.
pub(crate) fn cents(v: Decimal, dp: u32) -> Decimal {
    v.round_dp_with_strategy(dp, RoundingStrategy::MidpointAwayFromZero)
}

pub(crate) struct Reader<'a> {
    contract: &'static str,
    facts: &'a Facts,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(contract: &'static str, facts: &'a Facts) -> Self {
        Reader { contract, facts }
    }

    pub(crate) fn gap(&self, message: impl Into<String>) -> OracleGap {
        OracleGap {
            contract: self.contract.to_string(),
            message: message.into(),
        }
    }

    fn raw(&self, name: &str) -> Result<&'a str, OracleGap> {
        self.facts
            .get(name)
            .map(String::as_str)
            .ok_or_else(|| self.gap(format!("fact {name} is missing")))
    }

    pub(crate) fn number(&self, name: &str) -> Result<Decimal, OracleGap> {
        let raw = self.raw(name)?;
        Decimal::from_str(raw)
            .or_else(|_| Decimal::from_scientific(raw))
            .map_err(|_| self.gap(format!("fact {name} = '{raw}' is not a number")))
    }

    pub(crate) fn text(&self, name: &str) -> Result<&'a str, OracleGap> {
        self.raw(name)
    }

    pub(crate) fn flag(&self, name: &str) -> Result<bool, OracleGap> {
        match self.raw(name)? {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(self.gap(format!("fact {name} = '{other}' is not a boolean"))),
        }
    }
}

pub(crate) fn unknown_clause(contract: &'static str, name: &str) -> OracleGap {
    OracleGap {
        contract: contract.to_string(),
        message: format!("no clause named {name}"),
    }
}
