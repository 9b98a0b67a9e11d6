//! Exact decimal numbers and the rounding rules used by every formula.
//!
//! Addition, subtraction and multiplication are exact. Division, square
//! roots, `exp`, `log` and negative powers cannot be exact in general; those
//! results carry at least `precision + GUARD_DIGITS` decimal places and at
//! least [`SIGNIFICANT_DIGITS`] significant digits, rounded half-even. The
//! declared rounding mode is applied once, to the final value.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use bigdecimal::BigDecimal;
use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Decimal places kept beyond the declared precision for inexact steps.
pub const GUARD_DIGITS: u32 = 6;

/// Minimum significant digits kept for inexact intermediate results.
pub const SIGNIFICANT_DIGITS: i64 = 40;

/// Upper bound on the size of any intermediate, in decimal digits.
pub const MAX_DIGITS: u64 = 10_000;

/// `exp` rejects arguments whose magnitude exceeds this bound.
pub const MAX_EXP_ARGUMENT: i64 = 1_000;

const MAX_BITS: u64 = MAX_DIGITS * 10 / 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecimalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("{function} is undefined for {operand}")]
    Domain {
        function: &'static str,
        operand: String,
    },
    #[error("result exceeds {MAX_DIGITS} digits")]
    Overflow,
    #[error("exponent {0} is not an integer")]
    NonIntegerExponent(String),
    #[error("invalid decimal literal '{0}'")]
    Parse(String),
}

/// Tie-breaking and direction rule used when a value is rounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundingMode {
    /// Round to nearest, ties away from zero (commercial rounding).
    #[default]
    HalfUp,
    /// Round to nearest, ties to the even neighbour.
    HalfEven,
    /// Round to nearest, ties toward zero.
    HalfDown,
    /// Away from zero.
    Up,
    /// Toward zero.
    Down,
    /// Toward positive infinity.
    Ceiling,
    /// Toward negative infinity.
    Floor,
}

impl RoundingMode {
    pub const ALL: [RoundingMode; 7] = [
        RoundingMode::HalfUp,
        RoundingMode::HalfEven,
        RoundingMode::HalfDown,
        RoundingMode::Up,
        RoundingMode::Down,
        RoundingMode::Ceiling,
        RoundingMode::Floor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RoundingMode::HalfUp => "half_up",
            RoundingMode::HalfEven => "half_even",
            RoundingMode::HalfDown => "half_down",
            RoundingMode::Up => "up",
            RoundingMode::Down => "down",
            RoundingMode::Ceiling => "ceiling",
            RoundingMode::Floor => "floor",
        }
    }

    fn to_bigdecimal(self) -> bigdecimal::RoundingMode {
        match self {
            RoundingMode::HalfUp => bigdecimal::RoundingMode::HalfUp,
            RoundingMode::HalfEven => bigdecimal::RoundingMode::HalfEven,
            RoundingMode::HalfDown => bigdecimal::RoundingMode::HalfDown,
            RoundingMode::Up => bigdecimal::RoundingMode::Up,
            RoundingMode::Down => bigdecimal::RoundingMode::Down,
            RoundingMode::Ceiling => bigdecimal::RoundingMode::Ceiling,
            RoundingMode::Floor => bigdecimal::RoundingMode::Floor,
        }
    }
}

impl fmt::Display for RoundingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RoundingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let normalized = s.trim().to_ascii_lowercase().replace('-', "_");
        RoundingMode::ALL
            .into_iter()
            .find(|m| m.as_str() == normalized)
            .ok_or_else(|| {
                format!(
                    "unknown rounding mode '{s}' (expected one of: {})",
                    RoundingMode::ALL.map(|m| m.as_str()).join(", ")
                )
            })
    }
}

/// An exact decimal number with a non-negative scale.
///
/// Equality and ordering are numeric (`2.0 == 2.00`); rendering preserves the
/// scale, so `2.0` and `2.00` print differently.
#[derive(Clone)]
pub struct Decimal(BigDecimal);

fn pow10(n: u64) -> BigInt {
    num_traits::pow(BigInt::from(10u8), n as usize)
}

fn digit_count(m: &BigInt) -> i64 {
    if m.is_zero() {
        1
    } else {
        m.magnitude().to_str_radix(10).len() as i64
    }
}

/// Scale for an inexact result of decimal magnitude `magnitude`.
fn inexact_scale(min_scale: u32, magnitude: i64) -> u64 {
    let significant = SIGNIFICANT_DIGITS - 1 - magnitude;
    significant.max(i64::from(min_scale) + i64::from(GUARD_DIGITS)).max(0) as u64
}

/// Rounds the fixed-point integer `value / 10^from` to `value / 10^to`, half-even.
fn rescale_half_even(value: &BigInt, from: u64, to: u64) -> BigInt {
    if to >= from {
        return value * pow10(to - from);
    }
    let divisor = pow10(from - to);
    round_quotient_half_even(value, &divisor)
}

fn round_quotient_half_even(num: &BigInt, den: &BigInt) -> BigInt {
    let (q, r) = num.div_rem(den);
    if r.is_zero() {
        return q;
    }
    let twice = r.magnitude() * 2u8;
    let negative = (num.sign() == Sign::Minus) != (den.sign() == Sign::Minus);
    let away = match twice.cmp(den.magnitude()) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => q.is_odd(),
    };
    if !away {
        q
    } else if negative {
        q - 1
    } else {
        q + 1
    }
}

/// `atanh(z)` for a fixed-point `z` at scale `p`, `|z| < 1/2`.
fn atanh_fixed(z: &BigInt, p: u64) -> BigInt {
    let one = pow10(p);
    let z2 = (z * z) / &one;
    let mut power = z.clone();
    let mut sum = z.clone();
    let mut k = 3u32;
    loop {
        power = (&power * &z2) / &one;
        let term = &power / BigInt::from(k);
        if term.is_zero() {
            break;
        }
        sum += term;
        k += 2;
    }
    sum
}

impl Decimal {
    pub fn zero() -> Self {
        Decimal(BigDecimal::zero())
    }

    pub fn one() -> Self {
        Decimal(BigDecimal::one())
    }

    pub fn from_i64(v: i64) -> Self {
        Decimal(BigDecimal::from(v))
    }

    /// Builds `mantissa × 10^-scale`, folding a negative scale into the mantissa.
    pub fn from_parts(mantissa: BigInt, scale: i64) -> Self {
        if scale < 0 {
            Decimal(BigDecimal::new(mantissa * pow10(scale.unsigned_abs()), 0))
        } else {
            Decimal(BigDecimal::new(mantissa, scale))
        }
    }

    /// `(mantissa, scale)` such that the value is `mantissa × 10^-scale`.
    pub fn parts(&self) -> (BigInt, u64) {
        let (m, s) = self.0.as_bigint_and_exponent();
        (m, s.max(0) as u64)
    }

    pub fn scale(&self) -> u64 {
        self.parts().1
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn abs(&self) -> Self {
        Decimal(self.0.abs())
    }

    pub fn is_integer(&self) -> bool {
        let (m, s) = self.parts();
        s == 0 || (&m % pow10(s)).is_zero()
    }

    /// The value as an `i64` when it is integral and in range.
    pub fn to_i64(&self) -> Option<i64> {
        if !self.is_integer() {
            return None;
        }
        let (m, s) = self.parts();
        (m / pow10(s)).to_i64()
    }

    /// `floor(log10(|x|))`, or `None` for zero.
    pub fn magnitude(&self) -> Option<i64> {
        if self.is_zero() {
            return None;
        }
        let (m, s) = self.parts();
        Some(digit_count(&m) - 1 - s as i64)
    }

    /// Drops trailing fractional zeros.
    pub fn normalized(&self) -> Self {
        let (mut m, mut s) = self.parts();
        let ten = BigInt::from(10u8);
        while s > 0 && !m.is_zero() && (&m % &ten).is_zero() {
            m /= &ten;
            s -= 1;
        }
        if m.is_zero() {
            s = 0;
        }
        Decimal::from_parts(m, s as i64)
    }

    /// Rounds (or zero-pads) to exactly `scale` decimal places.
    pub fn round(&self, scale: u32, mode: RoundingMode) -> Self {
        Decimal(self.0.with_scale_round(i64::from(scale), mode.to_bigdecimal()))
    }

    pub fn floor(&self) -> Self {
        self.round(0, RoundingMode::Floor)
    }

    pub fn ceil(&self) -> Self {
        self.round(0, RoundingMode::Ceiling)
    }

    fn check_size(self) -> Result<Self, DecimalError> {
        let (m, s) = self.parts();
        if m.bits() > MAX_BITS || s > MAX_DIGITS {
            Err(DecimalError::Overflow)
        } else {
            Ok(self)
        }
    }

    pub fn checked_add(&self, rhs: &Decimal) -> Result<Self, DecimalError> {
        Decimal(&self.0 + &rhs.0).check_size()
    }

    pub fn checked_sub(&self, rhs: &Decimal) -> Result<Self, DecimalError> {
        Decimal(&self.0 - &rhs.0).check_size()
    }

    pub fn checked_mul(&self, rhs: &Decimal) -> Result<Self, DecimalError> {
        let (a, sa) = self.parts();
        let (b, sb) = rhs.parts();
        if a.bits() + b.bits() > MAX_BITS + 4 || sa + sb > MAX_DIGITS {
            return Err(DecimalError::Overflow);
        }
        Decimal::from_parts(a * b, (sa + sb) as i64).check_size()
    }

    pub fn neg(&self) -> Self {
        Decimal(-&self.0)
    }

    /// `floor(self / rhs)`, computed exactly.
    pub fn div_floor(&self, rhs: &Decimal) -> Result<Self, DecimalError> {
        if rhs.is_zero() {
            return Err(DecimalError::DivisionByZero);
        }
        let (a, sa) = self.parts();
        let (b, sb) = rhs.parts();
        let s = sa.max(sb);
        let num = a * pow10(s - sa);
        let den = b * pow10(s - sb);
        Ok(Decimal::from_parts(Integer::div_floor(&num, &den), 0))
    }

    /// Quotient, exact when it terminates within the working scale.
    pub fn checked_div(&self, rhs: &Decimal, min_scale: u32) -> Result<Self, DecimalError> {
        if rhs.is_zero() {
            return Err(DecimalError::DivisionByZero);
        }
        if self.is_zero() {
            return Ok(Decimal::zero());
        }
        let magnitude = self.magnitude().unwrap_or(0) - rhs.magnitude().unwrap_or(0) - 1;
        let target = inexact_scale(min_scale, magnitude);
        if target > MAX_DIGITS {
            return Err(DecimalError::Overflow);
        }
        let (a, sa) = self.parts();
        let (b, sb) = rhs.parts();
        let num = a * pow10(sb + target);
        let den = b * pow10(sa);
        let (q, r) = num.div_rem(&den);
        if r.is_zero() {
            return Decimal::from_parts(q, target as i64).normalized().check_size();
        }
        Decimal::from_parts(round_quotient_half_even(&num, &den), target as i64).check_size()
    }

    /// Integer power; negative exponents divide at the working scale.
    pub fn checked_powi(&self, exponent: i64, min_scale: u32) -> Result<Self, DecimalError> {
        if exponent == 0 {
            return Ok(Decimal::one());
        }
        let (m, s) = self.parts();
        let n = exponent.unsigned_abs();
        if m.is_zero() {
            return if exponent < 0 {
                Err(DecimalError::DivisionByZero)
            } else {
                Ok(Decimal::zero())
            };
        }
        let unit = m.magnitude().is_one();
        let bits = if unit { 0 } else { m.bits() };
        if bits.saturating_mul(n) > MAX_BITS || s.saturating_mul(n) > MAX_DIGITS {
            return Err(DecimalError::Overflow);
        }
        let powered = Decimal::from_parts(num_traits::pow(m, n as usize), (s * n) as i64);
        if exponent > 0 {
            Ok(powered)
        } else {
            Decimal::one().checked_div(&powered, min_scale)
        }
    }

    pub fn sqrt(&self, min_scale: u32) -> Result<Self, DecimalError> {
        if self.is_negative() {
            return Err(DecimalError::Domain {
                function: "sqrt",
                operand: self.to_string(),
            });
        }
        if self.is_zero() {
            return Ok(Decimal::zero());
        }
        let magnitude = Integer::div_floor(&self.magnitude().unwrap_or(0), &2);
        let (m, s) = self.parts();
        let mut target = inexact_scale(min_scale, magnitude);
        if 2 * target < s {
            target = s.div_ceil(2);
        }
        let n = m * pow10(2 * target - s);
        let root = n.sqrt();
        let rem = &n - &root * &root;
        if rem.is_zero() {
            return Ok(Decimal::from_parts(root, target as i64).normalized());
        }
        // n is an integer, so (root + 1/2)^2 can never equal it exactly.
        let root = if rem > root { root + 1 } else { root };
        Ok(Decimal::from_parts(root, target as i64))
    }

    pub fn exp(&self, min_scale: u32) -> Result<Self, DecimalError> {
        if self.is_zero() {
            return Ok(Decimal::one());
        }
        if self.abs() > Decimal::from_i64(MAX_EXP_ARGUMENT) {
            return Err(DecimalError::Domain {
                function: "exp",
                operand: self.to_string(),
            });
        }
        let negative = self.is_negative();
        let ax = self.abs();
        let int_part = ax.floor().to_i64().unwrap_or(MAX_EXP_ARGUMENT) + 1;
        // Upper bound on the decimal digits of e^|x| (log10(e) < 0.4343).
        let int_digits = ((int_part * 4343 + 9_999) / 10_000) as u64 + 1;
        let result_magnitude = if negative {
            -(int_digits as i64) - 1
        } else {
            int_digits as i64 - 1
        };
        let target = inexact_scale(min_scale, result_magnitude.min(0));
        let halvings = 64 - (int_part as u64).leading_zeros() as u64 + 8;
        let p = target + 2 * int_digits + halvings + 20;
        let one = pow10(p);

        let (m, s) = ax.parts();
        let reduced = (m * &one) / (pow10(s) << halvings as usize);
        let mut sum = one.clone();
        let mut term = one.clone();
        let mut i = 1u32;
        loop {
            term = (&term * &reduced) / (&one * BigInt::from(i));
            if term.is_zero() {
                break;
            }
            sum += &term;
            i += 1;
        }
        for _ in 0..halvings {
            sum = (&sum * &sum) / &one;
        }
        let value = if negative {
            round_quotient_half_even(&pow10(p + target), &sum)
        } else {
            rescale_half_even(&sum, p, target)
        };
        Decimal::from_parts(value, target as i64).check_size()
    }

    /// Natural logarithm.
    pub fn ln(&self, min_scale: u32) -> Result<Self, DecimalError> {
        if self.is_negative() || self.is_zero() {
            return Err(DecimalError::Domain {
                function: "log",
                operand: self.to_string(),
            });
        }
        let one_dec = Decimal::one();
        if *self == one_dec {
            return Ok(Decimal::zero());
        }
        // ln(x) ~ x - 1 near one; elsewhere its magnitude is at least 10^-1.
        let near = Decimal(&self.0 - &one_dec.0).magnitude().unwrap_or(0);
        let result_magnitude = near.min(-1) - 1;
        let target = inexact_scale(min_scale, result_magnitude);
        let (m, s) = self.parts();
        let k_guess = m.bits() as i64 - pow10(s).bits() as i64;
        let extra = k_guess.unsigned_abs().max(1).to_string().len() as u64 + 1;
        let p = target + extra + 20;
        let one = pow10(p);

        let scaled = |k: i64| -> BigInt {
            let num = &m * &one;
            if k >= 0 {
                num / (pow10(s) << k as usize)
            } else {
                (num << k.unsigned_abs() as usize) / pow10(s)
            }
        };
        // y = x / 2^k in [2/3, 4/3) keeps the atanh argument below 1/5.
        let upper = (&one * 4u8) / 3u8;
        let lower = (&one * 2u8) / 3u8;
        let mut k = k_guess;
        let mut y = scaled(k);
        while y >= upper {
            k += 1;
            y = scaled(k);
        }
        while y < lower {
            k -= 1;
            y = scaled(k);
        }
        let z = ((&y - &one) * &one) / (&y + &one);
        let ln_y = atanh_fixed(&z, p) * 2u8;
        let ln2 = atanh_fixed(&(&one / 3u8), p) * 2u8;
        let total = ln_y + ln2 * BigInt::from(k);
        Ok(Decimal::from_parts(
            rescale_half_even(&total, p, target),
            target as i64,
        ))
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (m, s) = self.parts();
        let negative = m.is_negative();
        let digits = m.magnitude().to_str_radix(10);
        let s = s as usize;
        let body = if s == 0 {
            digits
        } else if digits.len() > s {
            let (int, frac) = digits.split_at(digits.len() - s);
            format!("{int}.{frac}")
        } else {
            format!("0.{}{}", "0".repeat(s - digits.len()), digits)
        };
        if negative {
            write!(f, "-{body}")
        } else {
            f.write_str(&body)
        }
    }
}

impl fmt::Debug for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Decimal({self})")
    }
}

impl FromStr for Decimal {
    type Err = DecimalError;

    /// Accepts `-?digits(.digits)?` only: no exponent, sign prefix `+`, or spaces.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || DecimalError::Parse(s.to_string());
        let unsigned = s.strip_prefix('-').unwrap_or(s);
        let (int, frac) = match unsigned.split_once('.') {
            Some((i, f)) => (i, Some(f)),
            None => (unsigned, None),
        };
        let all_digits = |p: &str| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit());
        if !all_digits(int) || frac.is_some_and(|f| !all_digits(f)) {
            return Err(err());
        }
        let digits = format!("{int}{}", frac.unwrap_or(""));
        let mut mantissa: BigInt = digits.parse().map_err(|_| err())?;
        if s.starts_with('-') {
            mantissa = -mantissa;
        }
        let scale = frac.map_or(0, str::len) as i64;
        if scale as u64 > MAX_DIGITS || digits.len() as u64 > MAX_DIGITS {
            return Err(DecimalError::Overflow);
        }
        Ok(Decimal::from_parts(mantissa, scale))
    }
}

impl PartialEq for Decimal {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Decimal {}

impl PartialOrd for Decimal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Decimal {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.cmp(&other.0)
    }
}

impl From<i64> for Decimal {
    fn from(v: i64) -> Self {
        Decimal::from_i64(v)
    }
}

impl Serialize for Decimal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Decimal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> Decimal {
        s.parse().unwrap()
    }

    #[test]
    fn parse_and_render_keep_scale() {
        assert_eq!(d("6.0").to_string(), "6.0");
        assert_eq!(d("-0.050").to_string(), "-0.050");
        assert_eq!(d("0.001").to_string(), "0.001");
        assert_eq!(Decimal::from_parts(BigInt::from(3), -2).to_string(), "300");
        for bad in ["", "1e5", "+1", " 1", "1.", ".5", "1.2.3", "abc", "--1"] {
            assert!(bad.parse::<Decimal>().is_err(), "{bad}");
        }
    }

    #[test]
    fn div_floor_is_exact() {
        assert_eq!(d("0.05").div_floor(&d("0.10")).unwrap(), d("0"));
        assert_eq!(d("0.1").div_floor(&d("0.10")).unwrap(), d("1"));
        assert_eq!(d("-0.0005").div_floor(&d("0.1")).unwrap(), d("-1"));
        assert_eq!(d("7").div_floor(&d("-2")).unwrap(), d("-4"));
        assert!(d("1").div_floor(&d("0.00")).is_err());
    }

    #[test]
    fn equality_is_numeric() {
        assert_eq!(d("2.0"), d("2.00"));
        assert!(d("2.099") < d("2.1"));
        assert!(d("-1") < d("0"));
    }

    #[test]
    fn rounding_modes_on_ties() {
        let cases = [
            ("2.345", RoundingMode::HalfUp, "2.35"),
            ("2.345", RoundingMode::HalfEven, "2.34"),
            ("2.355", RoundingMode::HalfEven, "2.36"),
            ("2.345", RoundingMode::HalfDown, "2.34"),
            ("-2.345", RoundingMode::HalfUp, "-2.35"),
            ("2.341", RoundingMode::Up, "2.35"),
            ("2.349", RoundingMode::Down, "2.34"),
            ("-2.341", RoundingMode::Ceiling, "-2.34"),
            ("-2.341", RoundingMode::Floor, "-2.35"),
            ("4.7", RoundingMode::HalfUp, "4.70"),
        ];
        for (x, mode, want) in cases {
            assert_eq!(d(x).round(2, mode).to_string(), want, "{x} {mode}");
        }
    }

    #[test]
    fn division_exact_and_inexact() {
        assert_eq!(d("6.0").checked_div(&d("2.0"), 2).unwrap().to_string(), "3");
        assert_eq!(d("1").checked_div(&d("8"), 2).unwrap().to_string(), "0.125");
        let third = d("1").checked_div(&d("3"), 2).unwrap();
        assert_eq!(third.scale(), 40);
        assert!(third.to_string().starts_with("0.3333333333"));
        assert_eq!(
            d("1").checked_div(&d("0"), 2).err(),
            Some(DecimalError::DivisionByZero)
        );
    }

    #[test]
    fn roots_and_transcendentals() {
        assert_eq!(d("0.015625").sqrt(2).unwrap().to_string(), "0.125");
        assert_eq!(d("2").sqrt(2).unwrap().round(10, RoundingMode::HalfEven).to_string(), "1.4142135624");
        assert_eq!(d("1").exp(2).unwrap().round(12, RoundingMode::HalfEven).to_string(), "2.718281828459");
        assert_eq!(d("-1").exp(2).unwrap().round(12, RoundingMode::HalfEven).to_string(), "0.367879441171");
        assert_eq!(d("10").ln(2).unwrap().round(12, RoundingMode::HalfEven).to_string(), "2.302585092994");
        assert_eq!(d("0.5").ln(2).unwrap().round(12, RoundingMode::HalfEven).to_string(), "-0.693147180560");
        assert_eq!(d("1").ln(2).unwrap(), Decimal::zero());
        assert!(d("0").ln(2).is_err());
        assert!(d("-4").sqrt(2).is_err());
        assert!(d("1001").exp(2).is_err());
    }

    #[test]
    fn powers() {
        assert_eq!(d("1.5").checked_powi(2, 2).unwrap().to_string(), "2.25");
        assert_eq!(d("2").checked_powi(-2, 2).unwrap().to_string(), "0.25");
        assert_eq!(d("0").checked_powi(-1, 2), Err(DecimalError::DivisionByZero));
        assert_eq!(d("1").checked_powi(1_000_000, 2).unwrap(), Decimal::one());
        assert_eq!(d("10").checked_powi(100_000, 2), Err(DecimalError::Overflow));
    }
}
