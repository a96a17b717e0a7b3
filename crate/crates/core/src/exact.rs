//! Arbitrary-precision rational helpers shared by every module.

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Parses `"num/den"`, an integer, or a finite decimal such as `"0.125"` into
/// an exact rational.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let s = text.trim();
    let bad = || Error::InvalidParameter(format!("not a rational number: {text:?}"));
    if let Some((num, den)) = s.split_once('/') {
        let num: BigInt = num.trim().parse().map_err(|_| bad())?;
        let den: BigInt = den.trim().parse().map_err(|_| bad())?;
        if den.is_zero() {
            return Err(Error::InvalidParameter(format!("zero denominator in {text:?}")));
        }
        return Ok(BigRational::new(num, den));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        let negative = int_part.starts_with('-');
        let digits = format!("{}{}", int_part.trim_start_matches(['-', '+']), frac_part);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let mut num: BigInt = digits.parse().map_err(|_| bad())?;
        if negative {
            num = -num;
        }
        let den = num_traits::pow(BigInt::from(10u32), frac_part.len());
        return Ok(BigRational::new(num, den));
    }
    let num: BigInt = s.parse().map_err(|_| bad())?;
    Ok(BigRational::from_integer(num))
}

/// Formats as `"num/den"` (denominator always present).
pub fn format_rational(q: &BigRational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

/// Nearest f64; tiny or huge values saturate like ordinary float arithmetic.
pub fn to_f64(q: &BigRational) -> f64 {
    if let Some(x) = q.to_f64() {
        if x.is_finite() {
            return x;
        }
    }
    let sign = if q.is_negative() { -1.0 } else { 1.0 };
    sign * ln_abs(q).exp()
}

fn ln_bigint(n: &BigInt) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        if let Some(x) = n.to_f64() {
            return x.abs().ln();
        }
    }
    let shift = bits.saturating_sub(64);
    let top = (n.abs() >> shift).to_f64().unwrap_or(f64::MAX);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Natural log of |q| without overflow or underflow, q ≠ 0.
pub fn ln_abs(q: &BigRational) -> f64 {
    ln_bigint(q.numer()) - ln_bigint(q.denom())
}

/// Rounds to the nearest value `m · 2^e` with `|m| < 2^bits`.
pub fn round_to_bits(q: &BigRational, bits: u32) -> BigRational {
    if q.is_zero() {
        return q.clone();
    }
    let num_bits = q.numer().bits() as i64;
    let den_bits = q.denom().bits() as i64;
    // choose e so that |q| / 2^e has about `bits` integer bits
    let e = num_bits - den_bits - bits as i64;
    let scaled = if e >= 0 {
        q / BigRational::from_integer(BigInt::one() << e as u64)
    } else {
        q * BigRational::from_integer(BigInt::one() << (-e) as u64)
    };
    let m = scaled.round();
    if e >= 0 {
        m * BigRational::from_integer(BigInt::one() << e as u64)
    } else {
        m / BigRational::from_integer(BigInt::one() << (-e) as u64)
    }
}

pub fn floor_to_bigint(q: &BigRational) -> BigInt {
    let (d, _) = q.numer().div_mod_floor(q.denom());
    d
}

pub fn is_positive(q: &BigRational) -> bool {
    q.numer().sign() == Sign::Plus
}

pub fn rational_pow(q: &BigRational, k: usize) -> BigRational {
    num_traits::pow(q.clone(), k)
}
