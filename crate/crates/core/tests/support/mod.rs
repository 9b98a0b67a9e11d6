//! Exact rational reference arithmetic shared by the property suites. It
//! knows nothing about the engine's decimal type.

#![allow(dead_code)]

use dacl_core::decimal::RoundingMode;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub fn pow10(n: u32) -> BigInt {
    BigInt::from(10u8).pow(n)
}

/// Parses `-?digits(.digits)?` exactly.
pub fn rat(s: &str) -> BigRational {
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    let digits: BigInt = format!("{int}{frac}").parse().unwrap();
    let q = BigRational::new(digits, pow10(frac.len() as u32));
    if neg {
        -q
    } else {
        q
    }
}

/// `q` rounded to `places` decimals under `mode`, as an integer count of
/// `10^-places` units.
pub fn round_units(q: &BigRational, places: u32, mode: RoundingMode) -> BigInt {
    let scaled = q * BigRational::from_integer(pow10(places));
    let floor = scaled.numer().div_floor(scaled.denom());
    let frac = &scaled - BigRational::from_integer(floor.clone());
    if frac.is_zero() {
        return floor;
    }
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let up: BigInt = &floor + BigInt::one();
    let negative = q.is_negative();
    let away = if negative { floor.clone() } else { up.clone() };
    let toward = if negative { up.clone() } else { floor.clone() };
    match mode {
        RoundingMode::Floor => floor,
        RoundingMode::Ceiling => up,
        RoundingMode::Up => away,
        RoundingMode::Down => toward,
        _ if frac > half => up,
        _ if frac < half => floor,
        RoundingMode::HalfUp => away,
        RoundingMode::HalfDown => toward,
        RoundingMode::HalfEven if floor.is_even() => floor,
        RoundingMode::HalfEven => up,
    }
}

pub fn round(q: &BigRational, places: u32, mode: RoundingMode) -> BigRational {
    BigRational::new(round_units(q, places, mode), pow10(places))
}

/// Fixed-point text with exactly `places` decimals.
pub fn show(q: &BigRational, places: u32, mode: RoundingMode) -> String {
    let units = round_units(q, places, mode);
    let neg = units.is_negative();
    let digits = units.abs().to_string();
    let body = if places == 0 {
        digits
    } else {
        let padded = format!("{digits:0>width$}", width = places as usize + 1);
        let (i, f) = padded.split_at(padded.len() - places as usize);
        format!("{i}.{f}")
    };
    if neg && units != BigInt::zero() {
        format!("-{body}")
    } else {
        body
    }
}

/// Fixed-point reals with `FIXED_DIGITS` decimals, truncating each step.
pub const FIXED_DIGITS: u32 = 60;

pub fn fixed(q: &BigRational) -> BigInt {
    (q * BigRational::from_integer(pow10(FIXED_DIGITS))).to_integer()
}

/// e^x by its Taylor series.
pub fn exp_fixed(x: &BigRational) -> BigInt {
    let one = pow10(FIXED_DIGITS);
    let xf = fixed(x);
    let mut term = one.clone();
    let mut sum = one.clone();
    let mut n = 1u32;
    while !term.is_zero() {
        term = &term * &xf / &one / BigInt::from(n);
        sum += &term;
        n += 1;
    }
    sum
}

/// ln x as 2·atanh((x-1)/(x+1)).
pub fn ln_fixed(x: &BigRational) -> BigInt {
    let one = BigRational::from_integer(BigInt::one());
    let z = fixed(&((x - &one) / (x + &one)));
    let scale = pow10(FIXED_DIGITS);
    let z2 = &z * &z / &scale;
    let mut power = z.clone();
    let mut sum = BigInt::zero();
    let mut k = 1u32;
    while !power.is_zero() {
        sum += &power / BigInt::from(k);
        power = &power * &z2 / &scale;
        k += 2;
    }
    sum * 2
}

/// Rounds a fixed-point value, or `None` when it sits too close to a
/// rounding boundary for the truncation error to be ruled out.
pub fn show_fixed(v: &BigInt, places: u32, mode: RoundingMode) -> Option<String> {
    let q = BigRational::new(v.clone(), pow10(FIXED_DIGITS));
    let slack = BigRational::new(BigInt::from(1000), pow10(FIXED_DIGITS));
    let lo = show(&(&q - &slack), places, mode);
    let hi = show(&(&q + &slack), places, mode);
    (lo == hi).then_some(lo)
}
