//! Exact rational and complex-rational scalars.

use alloc::format;
use alloc::string::String;

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Q = BigRational;
pub type CQ = Complex<Q>;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qf(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn cq(re: Q, im: Q) -> CQ {
    Complex::new(re, im)
}

pub fn creal(re: Q) -> CQ {
    Complex::new(re, Q::zero())
}

/// `i^k` for any integer `k`.
pub fn i_pow(k: i64) -> CQ {
    match k.rem_euclid(4) {
        0 => cq(q(1), q(0)),
        1 => cq(q(0), q(1)),
        2 => cq(q(-1), q(0)),
        _ => cq(q(0), q(-1)),
    }
}

pub fn factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

pub fn binom(n: u32, k: u32) -> Q {
    if k > n {
        return Q::zero();
    }
    Q::new(factorial(n), factorial(k) * factorial(n - k))
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Converts a double to the rational with the shortest decimal expansion
/// that round-trips, so `0.2` becomes `1/5` rather than its binary value.
pub fn rational_from_f64(x: f64) -> Result<Q> {
    if !x.is_finite() {
        return Err(Error::InvalidParameter(format!("non-finite value {x}")));
    }
    let s: String = format!("{x:e}");
    parse_decimal(&s).ok_or_else(|| Error::InvalidParameter(format!("cannot rationalize {x}")))
}

/// Parses `[-]d[.ddd][e[-]n]` exactly.
pub fn parse_decimal(s: &str) -> Option<Q> {
    let s = s.trim();
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mant.strip_prefix('+').unwrap_or(mant)),
    };
    let (int, frac) = match mant.find('.') {
        Some(i) => (&mant[..i], &mant[i + 1..]),
        None => (mant, ""),
    };
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    let mut digits = String::from(int);
    digits.push_str(frac);
    let n: BigInt = digits.parse().ok()?;
    let scale = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    let mut v = if scale >= 0 {
        Q::from_integer(n * num_traits::pow(ten, scale as usize))
    } else {
        Q::new(n, num_traits::pow(ten, (-scale) as usize))
    };
    if neg {
        v = -v;
    }
    Some(v)
}

/// Exact square root when `x` is the square of a rational.
pub fn exact_sqrt(x: &Q) -> Option<Q> {
    if x.is_negative() {
        return None;
    }
    let n = x.numer().sqrt();
    let d = x.denom().sqrt();
    if &(&n * &n) == x.numer() && &(&d * &d) == x.denom() {
        Some(Q::new(n, d))
    } else {
        None
    }
}

/// A rational `s` with `s^2` as close to `x` as a double allows: the exact
/// root when one exists, otherwise the binary value of the rounded root.
pub fn sqrt_rational(x: &Q) -> Result<Q> {
    if let Some(s) = exact_sqrt(x) {
        return Ok(s);
    }
    let f = to_f64(x);
    if !(f >= 0.0) {
        return Err(Error::InvalidParameter(format!("square root of negative value {f}")));
    }
    Q::from_float(libm::sqrt(f)).ok_or_else(|| Error::InvalidParameter(format!("square root of {f}")))
}

pub fn conj(z: &CQ) -> CQ {
    Complex::new(z.re.clone(), -z.im.clone())
}

pub fn is_czero(z: &CQ) -> bool {
    z.re.is_zero() && z.im.is_zero()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimals_are_exact() {
        assert_eq!(rational_from_f64(0.2).unwrap(), qf(1, 5));
        assert_eq!(rational_from_f64(-1.25).unwrap(), qf(-5, 4));
        assert_eq!(rational_from_f64(100.0).unwrap(), q(100));
        assert_eq!(rational_from_f64(1e-3).unwrap(), qf(1, 1000));
    }

    #[test]
    fn powers_of_i() {
        assert_eq!(i_pow(2), creal(q(-1)));
        assert_eq!(i_pow(-1), cq(q(0), q(-1)));
        assert_eq!(&i_pow(3) * &i_pow(1), creal(q(1)));
    }

    #[test]
    fn square_roots() {
        assert_eq!(exact_sqrt(&qf(9, 4)), Some(qf(3, 2)));
        assert_eq!(exact_sqrt(&q(2)), None);
        let s = sqrt_rational(&q(2)).unwrap();
        assert!((to_f64(&(&s * &s)) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn binomials() {
        assert_eq!(binom(5, 2), q(10));
        assert_eq!(binom(3, 4), q(0));
    }
}
