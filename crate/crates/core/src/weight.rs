//! Arithmetic abstraction over exact rationals and floats.
//!
//! Combinatorial quantities (hypergeometric weights, coupling masses) are
//! written once, generically, and evaluated either exactly with
//! `BigRational` or quickly with `f64`.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{NumOps, One, ToPrimitive, Zero};

pub type Rational = BigRational;

pub trait Weight: Clone + Debug + PartialOrd + Zero + One + NumOps {
    fn from_u64(n: u64) -> Self;

    fn to_f64(&self) -> f64;

    fn ratio(num: u64, den: u64) -> Self {
        Self::from_u64(num) / Self::from_u64(den)
    }

    /// Binomial coefficient `C(n, k)`, zero when `k > n`.
    fn binomial(n: u64, k: u64) -> Self {
        if k > n {
            return Self::zero();
        }
        let k = k.min(n - k);
        let mut acc = Self::one();
        for t in 0..k {
            acc = acc * Self::from_u64(n - t) / Self::from_u64(t + 1);
        }
        acc
    }
}

impl Weight for f64 {
    fn from_u64(n: u64) -> Self {
        n as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Weight for BigRational {
    fn from_u64(n: u64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn binomial(n: u64, k: u64) -> Self {
        if k > n {
            return Self::zero();
        }
        let k = k.min(n - k);
        let mut acc = BigInt::one();
        for t in 0..k {
            acc = acc * BigInt::from(n - t) / BigInt::from(t + 1);
        }
        BigRational::from_integer(acc)
    }
}

/// Exact rational for a finite float (every finite `f64` is a dyadic rational).
pub fn rational_from_f64(x: f64) -> Option<Rational> {
    BigRational::from_float(x)
}

/// Parse `"p/q"`, an integer, or a finite decimal such as `"0.125"` or
/// `"-1.5e-3"` into an exact rational.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    if let Some((p, q)) = text.split_once('/') {
        let p: BigInt = p.trim().parse().ok()?;
        let q: BigInt = q.trim().parse().ok()?;
        if q.is_zero() {
            return None;
        }
        return Some(BigRational::new(p, q));
    }
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(pos) => (&text[..pos], text[pos + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all_digits = format!("{int_part}{frac_part}");
    let numerator: BigInt = if all_digits.is_empty() { BigInt::zero() } else { all_digits.parse().ok()? };
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    let mut value = if scale >= 0 {
        BigRational::from_integer(numerator * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(numerator, num_traits::pow(ten, (-scale) as usize))
    };
    if negative {
        value = -value;
    }
    Some(value)
}

/// Render as `"p/q"` (or `"p"` for integers).
pub fn format_rational(x: &Rational) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn rational_to_f64(x: &Rational) -> f64 {
    <Rational as Weight>::to_f64(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(p: i64, d: i64) -> Rational {
        BigRational::new(BigInt::from(p), BigInt::from(d))
    }

    #[test]
    fn binomials_agree_between_modes() {
        for n in 0..30u64 {
            for k in 0..=n + 1 {
                let exact = <Rational as Weight>::binomial(n, k);
                let float = <f64 as Weight>::binomial(n, k);
                assert!((Weight::to_f64(&exact) - float).abs() <= 1e-9 * float.max(1.0));
            }
        }
        assert_eq!(<Rational as Weight>::binomial(6, 2), q(15, 1));
        assert_eq!(<Rational as Weight>::binomial(3, 5), q(0, 1));
    }

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_rational("3/4"), Some(q(3, 4)));
        assert_eq!(parse_rational("0.1"), Some(q(1, 10)));
        assert_eq!(parse_rational("-1.25"), Some(q(-5, 4)));
        assert_eq!(parse_rational("2e-2"), Some(q(1, 50)));
        assert_eq!(parse_rational("7"), Some(q(7, 1)));
        assert_eq!(parse_rational(".5"), Some(q(1, 2)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("abc"), None);
        assert_eq!(parse_rational(""), None);
    }

    #[test]
    fn formats_round_trip() {
        for x in [q(3, 4), q(-7, 3), q(5, 1), q(0, 1)] {
            assert_eq!(parse_rational(&format_rational(&x)), Some(x));
        }
    }

    #[test]
    fn floats_convert_exactly() {
        let x = rational_from_f64(0.375).unwrap();
        assert_eq!(x, q(3, 8));
        assert!(rational_from_f64(f64::NAN).is_none());
    }
}
