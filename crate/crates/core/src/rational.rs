//! Exact-arithmetic helpers: parsing, falling factorials, conversion to
//! double-double floats and canonical string forms.

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use twofloat::TwoFloat;

use crate::error::{invalid, Result};

/// Exact rational scalar used throughout the crate.
pub type Q = BigRational;

/// Parses `p/q`, an integer, or a plain decimal (`0.125`, `-3.5`) into an exact rational.
pub fn parse_rational(text: &str) -> Result<Q> {
    let s = text.trim();
    if s.is_empty() {
        return invalid("empty rational literal");
    }
    if let Some((num, den)) = s.split_once('/') {
        let num: BigInt = num
            .trim()
            .parse()
            .map_err(|_| crate::LdError::Validation(format!("bad numerator in '{text}'")))?;
        let den: BigInt = den
            .trim()
            .parse()
            .map_err(|_| crate::LdError::Validation(format!("bad denominator in '{text}'")))?;
        if den.is_zero() {
            return invalid(format!("zero denominator in '{text}'"));
        }
        return Ok(Q::new(num, den));
    }
    let (negative, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    let digits_ok = |d: &str| d.chars().all(|c| c.is_ascii_digit());
    if (int_part.is_empty() && frac_part.is_empty()) || !digits_ok(int_part) || !digits_ok(frac_part) {
        return invalid(format!("'{text}' is not a rational literal (use p/q or a decimal)"));
    }
    let mantissa: BigInt = format!("{}{}", if int_part.is_empty() { "0" } else { int_part }, frac_part)
        .parse()
        .expect("digits only");
    let scale = BigInt::from(10u32).pow(frac_part.len() as u32);
    let value = Q::new(mantissa, scale);
    Ok(if negative { -value } else { value })
}

/// Integer rational constructor.
pub fn q_int(v: i64) -> Q {
    Q::from_integer(BigInt::from(v))
}

/// Rational `a/b` from machine integers.
pub fn q_frac(a: i64, b: i64) -> Q {
    Q::new(BigInt::from(a), BigInt::from(b))
}

/// Falling factorial `n (n-1) ... (n-k+1)`; equals 1 when `k = 0` and 0 when `k > n`.
pub fn falling_factorial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let mut acc = BigInt::one();
    for i in 0..k {
        acc *= BigInt::from(n - i);
    }
    acc
}

/// `r^e` for a non-negative integer exponent.
pub fn qpow(r: &Q, e: usize) -> Q {
    num_traits::pow(r.clone(), e)
}

/// Nearest double to an exact rational.
pub fn q_to_f64(r: &Q) -> f64 {
    r.to_f64().unwrap_or(if r.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY })
}

/// Exact rational as a double-double (about 106 significant bits).
pub fn q_to_twofloat(r: &Q) -> TwoFloat {
    let hi = q_to_f64(r);
    if !hi.is_finite() || hi == 0.0 {
        return TwoFloat::from(hi);
    }
    let hi_exact = Q::from_float(hi).expect("finite double");
    let lo = q_to_f64(&(r - hi_exact));
    TwoFloat::new_add(hi, lo)
}

/// Double-double quotient `a / b` with full double-double accuracy.
///
/// The quotient operator of `twofloat` loses the low word when no fused
/// multiply-add is available, so the quotient is refined by two correction steps
/// that only rely on exact double-double products.
pub fn dd_div(a: TwoFloat, b: TwoFloat) -> TwoFloat {
    let q1 = a.hi() / b.hi();
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    let q3 = r.hi() / b.hi();
    TwoFloat::new_add(q1, q2) + q3
}

/// Double-double value of `sign(s) * sqrt(|s|^2 / v)` for an exact `s` and positive `v`,
/// i.e. the quantity `s / sqrt(v)` with all irrationality deferred to one square root.
pub fn signed_sqrt_ratio(s: &Q, v: &Q) -> TwoFloat {
    if s.is_zero() {
        return TwoFloat::from(0.0);
    }
    let r = s * s / v;
    let root = q_to_twofloat(&r).sqrt();
    if s.is_negative() {
        -root
    } else {
        root
    }
}

/// Exact square root of a non-negative rational when both numerator and denominator are squares.
pub fn exact_sqrt(r: &Q) -> Option<Q> {
    if r.is_negative() {
        return None;
    }
    let root = |x: &BigInt| -> Option<BigInt> {
        let s = x.sqrt();
        (&s * &s == *x).then_some(s)
    };
    Some(Q::new(root(r.numer())?, root(r.denom())?))
}

/// Canonical text form: `a` for integers, `a/b` otherwise (lowest terms, sign on numerator).
pub fn format_rational(r: &Q) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Text form of `s / sqrt(v)`: an exact rational when the value is rational,
/// otherwise `sqrt(r)` / `-sqrt(r)` with `r = s^2 / v` exact.
pub fn format_sqrt_ratio(s: &Q, v: &Q) -> String {
    if s.is_zero() {
        return "0".to_string();
    }
    let r = s * s / v;
    match exact_sqrt(&r) {
        Some(root) => format_rational(&if s.is_negative() { -root } else { root }),
        None => {
            let sign = if s.is_negative() { "-" } else { "" };
            format!("{sign}sqrt({})", format_rational(&r))
        }
    }
}

/// Sign of a rational as -1, 0 or 1.
pub fn q_sign(r: &Q) -> i32 {
    match r.numer().sign() {
        Sign::Minus => -1,
        Sign::NoSign => 0,
        Sign::Plus => 1,
    }
}

/// `BigInt` as a rational.
pub fn q_from_big(b: BigInt) -> Q {
    Q::from_integer(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_rational("1/2").unwrap(), q_frac(1, 2));
        assert_eq!(parse_rational(" 3 / 6 ").unwrap(), q_frac(1, 2));
        assert_eq!(parse_rational("0.125").unwrap(), q_frac(1, 8));
        assert_eq!(parse_rational("-2.5").unwrap(), q_frac(-5, 2));
        assert_eq!(parse_rational("7").unwrap(), q_int(7));
        assert_eq!(parse_rational(".5").unwrap(), q_frac(1, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1e-3").is_err());
    }

    #[test]
    fn falling_factorial_values() {
        assert_eq!(falling_factorial(10, 2), BigInt::from(90));
        assert_eq!(falling_factorial(10, 4), BigInt::from(5040));
        assert_eq!(falling_factorial(5, 0), BigInt::from(1));
        assert_eq!(falling_factorial(3, 4), BigInt::from(0));
    }

    #[test]
    fn sqrt_ratio_forms() {
        assert_eq!(format_sqrt_ratio(&q_int(3), &q_int(4)), "3/2");
        assert_eq!(format_sqrt_ratio(&q_int(-1), &q_int(2)), "-sqrt(1/2)");
        let v = signed_sqrt_ratio(&q_int(1), &q_int(2));
        assert!((v.hi() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-16);
    }

    #[test]
    fn double_double_division_is_accurate() {
        let third = dd_div(TwoFloat::from(1.0), TwoFloat::from(3.0));
        assert!((third * 3.0 - 1.0).abs() < 1e-31);
        let x = dd_div(q_to_twofloat(&q_frac(22, 7)), q_to_twofloat(&q_frac(5, 11)));
        assert!((x - q_to_twofloat(&q_frac(242, 35))).abs() < 1e-30);
    }

    #[test]
    fn twofloat_conversion_keeps_extra_bits() {
        let third = q_frac(1, 3);
        let tf = q_to_twofloat(&third);
        let back = Q::from_float(tf.hi()).unwrap() + Q::from_float(tf.lo()).unwrap();
        let err = q_to_f64(&(back - third)).abs();
        assert!(err < 1e-30);
    }
}
