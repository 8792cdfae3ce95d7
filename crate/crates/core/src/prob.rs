//! Exact rational probabilities and their conversion to log space.

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Prob = BigRational;

pub fn ratio(numer: u64, denom: u64) -> Prob {
    BigRational::new(BigInt::from(numer), BigInt::from(denom))
}

/// Parses `"p/q"`, a decimal (`"0.035"`) or scientific notation (`"1e-4"`)
/// into an exact rational.
pub fn parse_prob(text: &str) -> Result<Prob> {
    let s = text.trim();
    let bad = || Error::InvalidProbability(text.to_string());
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits: BigInt = format!("{int_part}{frac_part}0").parse().map_err(|_| bad())?;
    let digits = digits / BigInt::from(10);
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut value = if scale >= 0 {
        BigRational::from_integer(digits * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(digits, num_traits::pow(ten, (-scale) as usize))
    };
    if neg {
        value = -value;
    }
    Ok(value)
}

/// Canonical text form: `"n"` or `"n/d"` in lowest terms.
pub fn format_prob(p: &Prob) -> String {
    if p.denom().is_one() {
        p.numer().to_string()
    } else {
        format!("{}/{}", p.numer(), p.denom())
    }
}

pub fn is_probability(p: &Prob) -> bool {
    !p.is_negative() && p <= &Prob::one()
}

fn ln_biguint(n: &BigUint) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        return n.to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 64;
    let top = (n >> shift).to_f64().unwrap_or(f64::INFINITY);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Natural log of a non-negative rational, accurate for magnitudes far
/// outside the `f64` range. Zero maps to −∞.
pub fn ln_prob(p: &Prob) -> f64 {
    match p.numer().sign() {
        Sign::NoSign => f64::NEG_INFINITY,
        Sign::Minus => f64::NAN,
        Sign::Plus => match p.to_f64() {
            Some(v) if v.is_normal() => v.ln(),
            _ => ln_biguint(p.numer().magnitude()) - ln_biguint(p.denom().magnitude()),
        },
    }
}

pub fn to_f64(p: &Prob) -> f64 {
    match p.to_f64() {
        Some(v) if v.is_finite() && (v != 0.0 || p.is_zero()) => v,
        _ => ln_prob(p).exp(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_notation() {
        assert_eq!(parse_prob("1/3").unwrap(), ratio(1, 3));
        assert_eq!(parse_prob("2/6").unwrap(), ratio(1, 3));
        assert_eq!(parse_prob("0.035").unwrap(), ratio(35, 1000));
        assert_eq!(parse_prob("1e-4").unwrap(), ratio(1, 10_000));
        assert_eq!(parse_prob("2.5E1").unwrap(), ratio(25, 1));
        assert_eq!(parse_prob(".5").unwrap(), ratio(1, 2));
        assert_eq!(parse_prob("1").unwrap(), ratio(1, 1));
        for bad in ["", "x", "1/0", "0.1.2", "e5", "1/"] {
            assert!(parse_prob(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn format_is_lowest_terms() {
        assert_eq!(format_prob(&ratio(2, 4)), "1/2");
        assert_eq!(format_prob(&ratio(3, 1)), "3");
        assert_eq!(parse_prob(&format_prob(&ratio(7, 30))).unwrap(), ratio(7, 30));
    }

    #[test]
    fn ln_of_huge_denominators() {
        let tiny = BigRational::new(BigInt::one(), BigInt::one() << 2000usize);
        let expect = -2000.0 * std::f64::consts::LN_2;
        assert!((ln_prob(&tiny) - expect).abs() < 1e-9);
        assert_eq!(ln_prob(&Prob::zero()), f64::NEG_INFINITY);
        assert!((ln_prob(&ratio(1, 20)) - (0.05f64).ln()).abs() < 1e-15);
    }
}
