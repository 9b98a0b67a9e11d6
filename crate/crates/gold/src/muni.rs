use std::collections::BTreeMap;

use chrono::NaiveDate;
use rust_decimal::Decimal;

use crate::{cents, unknown_clause, Facts, GoldOracle, GoldValue, OracleGap, Reader};

/// Road salt: a yearly base rate per ton indexed to CPI (base 100), to four
/// places, then tons times rate plus that year's invoice fee, to the cent.
pub struct MuniIfb;

fn terms(date: NaiveDate) -> Option<(Decimal, Decimal)> {
    let year = |y| NaiveDate::from_ymd_opt(y, 1, 1).expect("valid date");
    if date < year(2023) {
        None
    } else if date < year(2024) {
        Some((Decimal::new(425, 2), Decimal::new(15000, 2)))
    } else if date < year(2025) {
        Some((Decimal::new(440, 2), Decimal::new(16000, 2)))
    } else {
        Some((Decimal::new(455, 2), Decimal::new(16500, 2)))
    }
}

impl GoldOracle for MuniIfb {
    fn contract_id(&self) -> &'static str {
        "muni_ifb"
    }

    fn evaluate(&self, facts: &Facts, date: NaiveDate, clauses: &[String]) -> Result<BTreeMap<String, GoldValue>, OracleGap> {
        let r = Reader::new(self.contract_id(), facts);
        let mut out = BTreeMap::new();
        for clause in clauses {
            if clause != "invoice_amount" {
                return Err(unknown_clause(self.contract_id(), clause));
            }
            let (base_rate, fee) = terms(date).ok_or_else(|| r.gap(format!("no pricing year covers {date}")))?;
            let rate = cents(base_rate * r.number("cpi_index")? / Decimal::ONE_HUNDRED, 4);
            let amount = cents(r.number("quantity")? * rate + fee, 2);
            out.insert(clause.clone(), GoldValue::Decimal(amount));
        }
        Ok(out)
    }
}
