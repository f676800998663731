//! Exact rational arithmetic helpers.
//!
//! All probabilities and expectations in the exact code paths are
//! `ExactRational` values: arbitrary-precision fractions kept in lowest terms
//! with a positive denominator (guaranteed by the underlying representation).
//! Nothing in an exact path ever rounds; decimal output is a presentation
//! concern handled by [`decimal_string`].

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type ExactRational = num_rational::BigRational;

/// Exact rational from an unsigned integer.
pub fn from_u64(n: u64) -> ExactRational {
    ExactRational::from_integer(BigInt::from(n))
}

/// Exact rational from a signed integer.
pub fn from_i64(n: i64) -> ExactRational {
    ExactRational::from_integer(BigInt::from(n))
}

/// Exact rational `num/den`.
pub fn ratio(num: i64, den: i64) -> ExactRational {
    ExactRational::new(BigInt::from(num), BigInt::from(den))
}

/// Parses `"a/b"` or a plain integer `"a"` into an exact rational.
///
/// Whitespace around the string is tolerated; anything else is rejected.
pub fn parse_rational(s: &str) -> Result<ExactRational> {
    let trimmed = s.trim();
    let err = || Error::InvalidFraction(format!("cannot parse {s:?} as an exact fraction"));
    if trimmed.is_empty() {
        return Err(err());
    }
    match trimmed.split_once('/') {
        Some((num, den)) => {
            let num: BigInt = num.trim().parse().map_err(|_| err())?;
            let den: BigInt = den.trim().parse().map_err(|_| err())?;
            if den.is_zero() {
                return Err(Error::InvalidFraction(format!(
                    "zero denominator in {s:?}"
                )));
            }
            Ok(ExactRational::new(num, den))
        }
        None => {
            let num: BigInt = trimmed.parse().map_err(|_| err())?;
            Ok(ExactRational::from_integer(num))
        }
    }
}

/// Canonical textual form: `"3125/1296"`, or just `"3"` for integers.
///
/// This is the inverse of [`parse_rational`] and is stable across runs.
pub fn format_rational(r: &ExactRational) -> String {
    r.to_string()
}

/// Decimal expansion rounded to `digits` fractional digits, round-half-even.
///
/// Exact arithmetic throughout; the only rounding is the final half-even tie
/// break, so the output is deterministic.
pub fn decimal_string(r: &ExactRational, digits: usize) -> String {
    let negative = r.is_negative();
    let abs = r.abs();
    let scale = BigInt::from(10u32).pow(digits as u32);
    let scaled_num = abs.numer() * &scale;
    let (mut quot, rem) = scaled_num.div_rem(abs.denom());
    // Compare the remainder against half the denominator for the tie rule.
    let twice_rem: BigInt = &rem * 2;
    match twice_rem.cmp(abs.denom()) {
        std::cmp::Ordering::Greater => quot += 1,
        std::cmp::Ordering::Equal => {
            if quot.is_odd() {
                quot += 1;
            }
        }
        std::cmp::Ordering::Less => {}
    }
    let digits_str = quot.to_string();
    let (int_part, frac_part) = if digits == 0 {
        (digits_str, String::new())
    } else if digits_str.len() <= digits {
        let padded = format!("{digits_str:0>width$}", width = digits);
        ("0".to_string(), padded)
    } else {
        let split = digits_str.len() - digits;
        (digits_str[..split].to_string(), digits_str[split..].to_string())
    };
    let sign = if negative && (int_part != "0" || frac_part.chars().any(|c| c != '0')) {
        "-"
    } else {
        ""
    };
    if frac_part.is_empty() {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{frac_part}")
    }
}

/// The rounded decimal as an `f64`, for JSON emission.
pub fn decimal_f64(r: &ExactRational, digits: usize) -> f64 {
    decimal_string(r, digits).parse().unwrap_or(f64::NAN)
}

/// Nearest-double approximation without an intermediate decimal step.
pub fn to_f64(r: &ExactRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}
