//! Exact rational helpers shared by the market tables and the brute-force oracles.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

/// Exact value of a finite `f64`. Panics on NaN or infinities.
pub fn from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).unwrap_or_else(|| panic!("non-finite value {x} has no rational form"))
}

pub fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

pub fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Parses `"3"`, `"-0.025"`, `"67/600"` or `"1e-3"` into an exact rational.
///
/// Decimal strings are read digit by digit, so `"0.1"` is exactly `1/10`
/// rather than the nearest binary float.
pub fn parse(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    if let Some((n, d)) = s.split_once('/') {
        let n = parse(n)?;
        let d = parse(d)?;
        if d.is_zero() {
            return None;
        }
        return Some(n / d);
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if whole.is_empty() && frac.is_empty() {
        return None;
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all: String = format!("{whole}{frac}");
    let numer: BigInt = if all.is_empty() { BigInt::zero() } else { all.parse().ok()? };
    let scale = exponent - frac.len() as i32;
    let ten = BigInt::from(10);
    let mut value = BigRational::from_integer(numer);
    if scale >= 0 {
        value *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        value /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if negative { -value } else { value })
}

/// Exact decimal reading of an `f64` through its shortest round-trip representation.
///
/// `0.385_f64` becomes `77/200`, which is what a JSON author writing `0.385` means.
pub fn from_decimal_f64(x: f64) -> Option<BigRational> {
    if !x.is_finite() {
        return None;
    }
    parse(&format!("{x:e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse("67/600"), Some(ratio(67, 600)));
        assert_eq!(parse("0.385"), Some(ratio(77, 200)));
        assert_eq!(parse("-1.5e-2"), Some(ratio(-3, 200)));
        assert_eq!(parse("3"), Some(int(3)));
        assert_eq!(parse(".5"), Some(ratio(1, 2)));
        assert_eq!(parse("1/0"), None);
        assert_eq!(parse("abc"), None);
        assert_eq!(parse(""), None);
    }

    #[test]
    fn decimal_f64_reads_what_was_written() {
        assert_eq!(from_decimal_f64(0.025), Some(ratio(1, 40)));
        assert_eq!(from_decimal_f64(23.0 / 50.0), Some(ratio(23, 50)));
        assert_ne!(from_f64(0.1), ratio(1, 10));
    }
}
