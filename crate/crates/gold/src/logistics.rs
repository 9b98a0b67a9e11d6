use std::collections::BTreeMap;

use chrono::NaiveDate;
use rust_decimal::Decimal;

use crate::{cents, unknown_clause, Facts, GoldOracle, GoldValue, OracleGap, Reader};

/// Truckload services: a diesel-indexed fuel surcharge and the carrier rate.
pub struct LogisticsMsa;

const STOP_FEE: Decimal = Decimal::from_parts(10000, 0, 0, false, 2);

fn d(units: i64, scale: u32) -> Decimal {
    Decimal::new(units, scale)
}

/// Percent surcharge. One point per ten-cent band from $2.00, plus one from
/// $4.30 up, plus one per further ten cents from $6.70.
fn surcharge(price: Decimal) -> Option<Decimal> {
    let floor_band = |from: Decimal| ((price - from) / d(10, 2)).floor();
    if price < d(200, 2) {
        None
    } else if price >= d(670, 2) {
        Some(d(48, 0) + floor_band(d(670, 2)) + Decimal::ONE)
    } else {
        let band = floor_band(d(200, 2));
        let bump = if band >= d(23, 0) { Decimal::ONE } else { Decimal::ZERO };
        Some(band + Decimal::ONE + bump)
    }
}

fn equipment_column(equipment: &str) -> Option<usize> {
    ["dry_van", "flatbed", "reefer"].iter().position(|e| *e == equipment)
}

fn per_mile(weight: Decimal, column: usize) -> Decimal {
    let tier = if weight <= d(5, 1) {
        [d(215, 2), d(235, 2), d(255, 2)]
    } else if weight <= d(75, 2) {
        [d(265, 2), d(285, 2), d(305, 2)]
    } else {
        [d(340, 2), d(360, 2), d(380, 2)]
    };
    tier[column]
}

impl LogisticsMsa {
    fn rate(r: &Reader<'_>) -> Result<Decimal, OracleGap> {
        let service = r.text("service_type")?;
        let weight = r.number("weight")?;
        let stops = r.number("extra_stops")? * STOP_FEE;
        let column = || {
            let e = r.text("equipment")?;
            equipment_column(e).ok_or_else(|| r.gap(format!("unknown equipment {e}")))
        };
        let charge = match service {
            "linehaul" | "backhaul" => {
                let fuel = surcharge(r.number("diesel_price")?).ok_or_else(|| r.gap("diesel price below the schedule"))?;
                let mut mileage = r.number("miles")? * per_mile(weight, column()?);
                if service == "backhaul" {
                    mileage *= d(5, 1);
                }
                mileage * (Decimal::ONE + fuel / Decimal::ONE_HUNDRED) + stops
            }
            "local" => {
                let miles = r.number("miles")?;
                let fees = if miles <= d(45, 0) {
                    [d(185, 0), d(210, 0), d(235, 0)]
                } else if miles <= d(140, 0) {
                    [d(340, 0), d(375, 0), d(410, 0)]
                } else {
                    return Err(r.gap(format!("no local zone covers {miles} miles")));
                };
                fees[column()?] + stops
            }
            "day_rate" => {
                let full_day = r.number("hours")? > d(4, 0);
                let heavy = weight > d(75, 2);
                let day = match (heavy, full_day) {
                    (false, false) => d(520, 0),
                    (false, true) => d(950, 0),
                    (true, false) => d(640, 0),
                    (true, true) => d(1180, 0),
                };
                day + stops
            }
            other => return Err(r.gap(format!("unknown service type {other}"))),
        };
        Ok(cents(charge, 2))
    }
}

impl GoldOracle for LogisticsMsa {
    fn contract_id(&self) -> &'static str {
        "logistics_msa"
    }

    fn evaluate(&self, facts: &Facts, _date: NaiveDate, clauses: &[String]) -> Result<BTreeMap<String, GoldValue>, OracleGap> {
        let r = Reader::new(self.contract_id(), facts);
        let mut out = BTreeMap::new();
        for clause in clauses {
            let value = match clause.as_str() {
                "diesel_surcharge" => surcharge(r.number("diesel_price")?).ok_or_else(|| r.gap("diesel price below the schedule"))?,
                "linehaul_rate" => Self::rate(&r)?,
                other => return Err(unknown_clause(self.contract_id(), other)),
            };
            out.insert(clause.clone(), GoldValue::Decimal(value));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::str::FromStr;

    fn pct(p: &str) -> String {
        surcharge(Decimal::from_str(p).unwrap()).unwrap().to_string()
    }

    #[test]
    fn schedule_anchor_points() {
        for (price, want) in [("2.05", "1"), ("4.15", "22"), ("4.55", "27"), ("6.65", "48"), ("6.75", "49"), ("6.85", "50")] {
            assert_eq!(pct(price), want, "at {price}");
        }
        assert_eq!(pct("4.299"), "23");
        assert_eq!(pct("4.30"), "25");
        assert_eq!(pct("6.699"), "48");
        assert_eq!(pct("6.70"), "49");
        assert!(surcharge(Decimal::from_str("1.99").unwrap()).is_none());
    }
}
