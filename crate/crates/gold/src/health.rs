use std::collections::BTreeMap;

use chrono::NaiveDate;
use rust_decimal::Decimal;

use crate::{unknown_clause, Facts, GoldOracle, GoldValue, OracleGap, Reader};

/// Ambulance benefit. Checked in the order the plan document lists its rules.
pub struct HealthPpo;

impl GoldOracle for HealthPpo {
    fn contract_id(&self) -> &'static str {
        "health_ppo"
    }

    fn evaluate(&self, facts: &Facts, _date: NaiveDate, clauses: &[String]) -> Result<BTreeMap<String, GoldValue>, OracleGap> {
        let r = Reader::new(self.contract_id(), facts);
        let mut out = BTreeMap::new();
        for clause in clauses {
            if clause != "ambulance_coverage" {
                return Err(unknown_clause(self.contract_id(), clause));
            }
            let child = r.text("relationship")? == "child";
            let age = r.number("age")?;
            let family = r.text("plan_type")? == "family";
            let air = r.text("transport_mode")? == "air";
            let outcome = if child && (age >= Decimal::from(26) || !family) {
                "not_covered_ineligible_dependent"
            } else if !r.flag("emergency")? {
                "not_covered_non_emergency"
            } else if air && (r.flag("medically_necessary")? || (child && age < Decimal::from(18))) {
                "covered_air_ambulance"
            } else if r.flag("admitted")? {
                "covered_with_admission"
            } else {
                "covered_emergency_copay"
            };
            out.insert(clause.clone(), GoldValue::Text(outcome.to_string()));
        }
        Ok(out)
    }
}
