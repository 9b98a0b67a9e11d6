use std::collections::BTreeMap;

use chrono::NaiveDate;

use crate::{cents, unknown_clause, Facts, GoldOracle, GoldValue, OracleGap, Reader};

/// Gas supply: index over conversion factor plus three per-unit adders, to the cent.
pub struct EnergySup;

impl GoldOracle for EnergySup {
    fn contract_id(&self) -> &'static str {
        "energy_sup"
    }

    fn evaluate(&self, facts: &Facts, _date: NaiveDate, clauses: &[String]) -> Result<BTreeMap<String, GoldValue>, OracleGap> {
        let r = Reader::new(self.contract_id(), facts);
        let mut out = BTreeMap::new();
        for clause in clauses {
            if clause != "price_per_unit" {
                return Err(unknown_clause(self.contract_id(), clause));
            }
            let factor = r.number("conversion_factor")?;
            if factor.is_zero() {
                return Err(r.gap("conversion factor of zero"));
            }
            let index = r.number("regional_gas_index")?;
            let adders = r.number("y")? + r.number("r")? + r.number("f")?;
            out.insert(clause.clone(), GoldValue::Decimal(cents(index / factor + adders, 2)));
        }
        Ok(out)
    }
}
