//! Scalar types the concrete interpreter and the reference evaluator are generic over.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exact rational numbers. Every constant inside a symbolic term is one of these.
pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("log of non-positive value {0}")]
    LogNonPositive(String),
    #[error("sqrt of negative value {0}")]
    SqrtNegative(String),
    #[error("non-finite result from {0}")]
    NonFinite(&'static str),
}

/// Elementwise mathematical functions. Symbolically they are uninterpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MathFn {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
    Tanh,
    Abs,
}

impl MathFn {
    pub const ALL: [MathFn; 7] = [
        MathFn::Exp,
        MathFn::Log,
        MathFn::Sin,
        MathFn::Cos,
        MathFn::Sqrt,
        MathFn::Tanh,
        MathFn::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MathFn::Exp => "exp",
            MathFn::Log => "log",
            MathFn::Sin => "sin",
            MathFn::Cos => "cos",
            MathFn::Sqrt => "sqrt",
            MathFn::Tanh => "tanh",
            MathFn::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<MathFn> {
        MathFn::ALL.iter().copied().find(|f| f.name() == name)
    }

    /// Reference real-valued implementation with domain checks.
    pub fn eval_f64(self, x: f64) -> Result<f64, DomainError> {
        let y = match self {
            MathFn::Exp => x.exp(),
            MathFn::Log => {
                if x <= 0.0 {
                    return Err(DomainError::LogNonPositive(x.to_string()));
                }
                x.ln()
            }
            MathFn::Sin => x.sin(),
            MathFn::Cos => x.cos(),
            MathFn::Sqrt => {
                if x < 0.0 {
                    return Err(DomainError::SqrtNegative(x.to_string()));
                }
                x.sqrt()
            }
            MathFn::Tanh => x.tanh(),
            MathFn::Abs => x.abs(),
        };
        if y.is_finite() {
            Ok(y)
        } else {
            Err(DomainError::NonFinite(self.name()))
        }
    }
}

impl fmt::Display for MathFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A number type usable by the concrete interpreter and the formula evaluator.
///
/// `f32`/`f64` give machine evaluation; [`Rational`] gives exact arithmetic, with
/// transcendental functions exact at their trivial points and otherwise routed through
/// the `f64` reference implementation.
pub trait Scalar:
    Clone
    + fmt::Debug
    + fmt::Display
    + PartialOrd
    + Zero
    + One
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    /// Whether arithmetic on this type is exact.
    const EXACT: bool;

    fn from_rational(r: &Rational) -> Self;
    fn to_f64(&self) -> f64;
    fn checked_div(&self, rhs: &Self) -> Result<Self, DomainError>;
    fn apply(f: MathFn, x: &Self) -> Result<Self, DomainError>;
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_rational(r: &Rational) -> Self {
        rational_to_f64(r)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn checked_div(&self, rhs: &Self) -> Result<Self, DomainError> {
        if *rhs == 0.0 {
            Err(DomainError::DivisionByZero)
        } else {
            Ok(self / rhs)
        }
    }
    fn apply(f: MathFn, x: &Self) -> Result<Self, DomainError> {
        f.eval_f64(*x)
    }
}

impl Scalar for f32 {
    const EXACT: bool = false;

    fn from_rational(r: &Rational) -> Self {
        rational_to_f64(r) as f32
    }
    fn to_f64(&self) -> f64 {
        *self as f64
    }
    fn checked_div(&self, rhs: &Self) -> Result<Self, DomainError> {
        if *rhs == 0.0 {
            Err(DomainError::DivisionByZero)
        } else {
            Ok(self / rhs)
        }
    }
    fn apply(f: MathFn, x: &Self) -> Result<Self, DomainError> {
        let y = f.eval_f64(*x as f64)? as f32;
        if y.is_finite() {
            Ok(y)
        } else {
            Err(DomainError::NonFinite(f.name()))
        }
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }
    fn to_f64(&self) -> f64 {
        rational_to_f64(self)
    }
    fn checked_div(&self, rhs: &Self) -> Result<Self, DomainError> {
        if rhs.is_zero() {
            Err(DomainError::DivisionByZero)
        } else {
            Ok(self / rhs)
        }
    }
    fn apply(f: MathFn, x: &Self) -> Result<Self, DomainError> {
        match f {
            MathFn::Abs => return Ok(x.abs()),
            MathFn::Exp | MathFn::Cos if x.is_zero() => return Ok(Rational::one()),
            MathFn::Sin | MathFn::Tanh if x.is_zero() => return Ok(Rational::zero()),
            MathFn::Log if x.is_one() => return Ok(Rational::zero()),
            MathFn::Log if !x.is_positive() => {
                return Err(DomainError::LogNonPositive(x.to_string()))
            }
            MathFn::Sqrt => {
                if x.is_negative() {
                    return Err(DomainError::SqrtNegative(x.to_string()));
                }
                if let Some(r) = exact_sqrt(x) {
                    return Ok(r);
                }
            }
            _ => {}
        }
        let y = f.eval_f64(rational_to_f64(x))?;
        Rational::from_f64(y).ok_or(DomainError::NonFinite(f.name()))
    }
}

fn exact_sqrt(x: &Rational) -> Option<Rational> {
    let n = x.numer().sqrt();
    let d = x.denom().sqrt();
    if &(&n * &n) == x.numer() && &(&d * &d) == x.denom() {
        Some(Rational::new(n, d))
    } else {
        None
    }
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    if let (Some(n), Some(d)) = (r.numer().to_f64(), r.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            return n / d;
        }
    }
    ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Parses a decimal literal such as `0.044715` or `-1.5e-3` into an exact rational.
pub fn parse_decimal(text: &str) -> Option<Rational> {
    let (mantissa, exp) = match text.find(['e', 'E']) {
        Some(pos) => (&text[..pos], text[pos + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa),
    };
    let (whole, frac) = match mantissa.split_once('.') {
        Some((w, f)) => (w, f),
        None => (mantissa, ""),
    };
    if whole.is_empty() && frac.is_empty() {
        return None;
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{}{}", whole, frac).parse().ok()?;
    let scale = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    let mut value = Rational::from_integer(digits);
    if scale >= 0 {
        value *= Rational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        value /= Rational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if neg { -value } else { value })
}

/// Renders a rational as a terminating decimal when possible, otherwise as `p/q`.
pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        return r.numer().to_string();
    }
    let mut d = r.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let mut twos = 0usize;
    let mut fives = 0usize;
    while (&d % &two).is_zero() {
        d /= &two;
        twos += 1;
    }
    while (&d % &five).is_zero() {
        d /= &five;
        fives += 1;
    }
    if !d.is_one() {
        return format!("{}/{}", r.numer(), r.denom());
    }
    let places = twos.max(fives);
    let scaled = r * Rational::from_integer(num_traits::pow(BigInt::from(10), places));
    let digits = scaled.to_integer().abs().to_string();
    let digits = format!("{:0>width$}", digits, width = places + 1);
    let (whole, frac) = digits.split_at(digits.len() - places);
    let sign = if r.is_negative() { "-" } else { "" };
    format!("{}{}.{}", sign, whole, frac)
}

/// Relative error with an absolute floor of 1: `|a - b| / max(1, |a|, |b|)`.
pub fn rel_error(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_round_trip() {
        assert_eq!(parse_decimal("0.01").unwrap(), ratio(1, 100));
        assert_eq!(parse_decimal("-1.5e-3").unwrap(), ratio(-3, 2000));
        assert_eq!(parse_decimal("4").unwrap(), int(4));
        assert_eq!(format_rational(&ratio(1, 100)), "0.01");
        assert_eq!(format_rational(&ratio(-3, 2000)), "-0.0015");
        assert_eq!(format_rational(&ratio(1, 3)), "1/3");
        assert_eq!(format_rational(&int(-7)), "-7");
        let g = parse_decimal("0.044715").unwrap();
        assert_eq!(format_rational(&g), "0.044715");
    }

    #[test]
    fn rational_functions_exact_at_trivial_points() {
        assert_eq!(Rational::apply(MathFn::Exp, &int(0)).unwrap(), int(1));
        assert_eq!(Rational::apply(MathFn::Sqrt, &ratio(9, 4)).unwrap(), ratio(3, 2));
        assert!(matches!(
            Rational::apply(MathFn::Log, &int(0)),
            Err(DomainError::LogNonPositive(_))
        ));
        assert!(matches!(
            int(1).checked_div(&int(0)),
            Err(DomainError::DivisionByZero)
        ));
    }

    #[test]
    fn float_domain_errors() {
        assert!(f64::apply(MathFn::Sqrt, &-1.0).is_err());
        assert!(f32::apply(MathFn::Log, &-1.0).is_err());
        assert_eq!(f64::apply(MathFn::Abs, &-2.0).unwrap(), 2.0);
    }
}
