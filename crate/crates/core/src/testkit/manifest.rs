use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decimal::Decimal;
use crate::loader::{load_contract, Contract, LoadError};

/// Value ranges for one variable. Decimal variables use `min`, `max` and
/// `scale`; text variables without an enum list their `values`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<Decimal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<Decimal>,
    #[serde(default)]
    pub scale: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

/// What the generator needs to know about a fixture beyond its contract.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub contract_id: String,
    pub contract_file: String,
    /// Declared decision states, counted the way coverage counts them.
    pub states: usize,
    #[serde(default)]
    pub state_split: BTreeMap<String, usize>,
    /// Clauses every generated event requests.
    pub request: Vec<String>,
    pub dates: DateRange,
    #[serde(default)]
    pub domains: BTreeMap<String, Domain>,
    /// Amounts the fixture chose where the source contract leaves them blank.
    #[serde(default)]
    pub declared_values: BTreeMap<String, Decimal>,
    /// States no valid input can reach, by their display form.
    #[serde(default)]
    pub unreachable: Vec<String>,
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("contract {path}: {source}")]
    Contract { path: PathBuf, source: LoadError },
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub manifest: Manifest,
    pub contract: Contract,
}

fn read(path: &Path) -> Result<Vec<u8>, FixtureError> {
    fs::read(path).map_err(|source| FixtureError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads `<id>.manifest.json` and the contract it names from `dir`.
pub fn load_fixture(dir: &Path, contract_id: &str) -> Result<Fixture, FixtureError> {
    let path = dir.join(format!("{contract_id}.manifest.json"));
    let manifest: Manifest = serde_json::from_slice(&read(&path)?).map_err(|e| FixtureError::Manifest {
        path: path.clone(),
        message: e.to_string(),
    })?;
    let contract_path = dir.join(&manifest.contract_file);
    let (contract, _) = load_contract(&read(&contract_path)?).map_err(|source| FixtureError::Contract {
        path: contract_path.clone(),
        source,
    })?;
    if contract.id() != manifest.contract_id {
        return Err(FixtureError::Manifest {
            path,
            message: format!("names contract {} but the file holds {}", manifest.contract_id, contract.id()),
        });
    }
    Ok(Fixture { manifest, contract })
}
