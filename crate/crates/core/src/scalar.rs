//! Exact rational scalars for positions and distances on the line.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::CoreError;

/// An exact rational number. The denominator is always positive and the
/// fraction is always reduced.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Scalar(BigRational);

impl Scalar {
    pub fn new(numerator: i64, denominator: i64) -> Result<Self, CoreError> {
        if denominator == 0 {
            return Err(CoreError::ZeroDenominator);
        }
        Ok(Scalar(BigRational::new(numerator.into(), denominator.into())))
    }

    pub fn from_big(numerator: BigInt, denominator: BigInt) -> Result<Self, CoreError> {
        if denominator.is_zero() {
            return Err(CoreError::ZeroDenominator);
        }
        Ok(Scalar(BigRational::new(numerator, denominator)))
    }

    pub fn integer(value: i64) -> Self {
        Scalar(BigRational::from_integer(value.into()))
    }

    pub fn zero() -> Self {
        Scalar(BigRational::zero())
    }

    pub fn one() -> Self {
        Scalar(BigRational::one())
    }

    pub fn numerator(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denominator(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn abs(&self) -> Scalar {
        Scalar(self.0.abs())
    }

    /// Exact midpoint `(a + b) / 2`.
    pub fn midpoint(a: &Scalar, b: &Scalar) -> Scalar {
        Scalar((&a.0 + &b.0) / BigRational::from_integer(2.into()))
    }

    pub fn distance(&self, other: &Scalar) -> Scalar {
        Scalar((&self.0 - &other.0).abs())
    }

    /// Rounded decimal rendering with `precision` fractional digits
    /// (round half away from zero).
    pub fn to_decimal(&self, precision: usize) -> String {
        let scale = BigInt::from(10u32).pow(precision as u32);
        let magnitude: BigInt = self.0.numer().abs() * &scale * 2 + self.0.denom();
        let rounded = magnitude.div_floor(&(self.0.denom() * 2));
        let digits = rounded.to_string();
        let negative = self.0.is_negative() && !rounded.is_zero();
        let mut out = String::new();
        if negative {
            out.push('-');
        }
        if precision == 0 {
            out.push_str(&digits);
            return out;
        }
        let padded = format!("{:0>width$}", digits, width = precision + 1);
        let (whole, frac) = padded.split_at(padded.len() - precision);
        out.push_str(whole);
        out.push('.');
        out.push_str(frac);
        out
    }

    /// Lossy conversion for summary statistics only.
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Bit length of the denominator, a cheap proxy for representation size.
    pub fn denominator_bits(&self) -> u64 {
        self.0.denom().bits()
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Accepts `p/q`, integers, decimals (`-0.25`) and scientific notation
/// (`1e-6`, `2.5E3`). Decimal inputs are converted exactly.
impl FromStr for Scalar {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let text = s.trim();
        let bad = || CoreError::Parse(s.to_string());
        if text.is_empty() {
            return Err(bad());
        }
        if let Some((num, den)) = text.split_once('/') {
            let num: BigInt = num.trim().parse().map_err(|_| bad())?;
            let den: BigInt = den.trim().parse().map_err(|_| bad())?;
            return Scalar::from_big(num, den);
        }

        let (mantissa, exponent) = match text.find(['e', 'E']) {
            Some(idx) => {
                let exp: i32 = text[idx + 1..].parse().map_err(|_| bad())?;
                (&text[..idx], exp)
            }
            None => (text, 0),
        };
        let (negative, unsigned) = match mantissa.as_bytes().first() {
            Some(b'-') => (true, &mantissa[1..]),
            Some(b'+') => (false, &mantissa[1..]),
            _ => (false, mantissa),
        };
        let (whole, frac) = unsigned.split_once('.').unwrap_or((unsigned, ""));
        if whole.is_empty() && frac.is_empty() {
            return Err(bad());
        }
        if !whole.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let digits: BigInt = format!("{whole}{frac}").parse().map_err(|_| bad())?;
        let shift = exponent - frac.len() as i32;
        let ten = BigInt::from(10u32);
        let mut value = if shift >= 0 {
            BigRational::from_integer(digits * ten.pow(shift as u32))
        } else {
            BigRational::new(digits, ten.pow((-shift) as u32))
        };
        if negative {
            value = -value;
        }
        Ok(Scalar(value))
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait<&Scalar> for &Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &Scalar) -> Scalar {
                Scalar($trait::$method(&self.0, &rhs.0))
            }
        }
        impl $trait<Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                Scalar($trait::$method(self.0, rhs.0))
            }
        }
        impl $trait<&Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &Scalar) -> Scalar {
                Scalar($trait::$method(self.0, &rhs.0))
            }
        }
        impl $trait<Scalar> for &Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                Scalar($trait::$method(&self.0, rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);

impl Div<&Scalar> for &Scalar {
    type Output = Scalar;

    /// Panics on division by zero, like the integer types.
    fn div(self, rhs: &Scalar) -> Scalar {
        assert!(!rhs.is_zero(), "division of Scalar by zero");
        Scalar(&self.0 / &rhs.0)
    }
}

impl Div<Scalar> for Scalar {
    type Output = Scalar;
    fn div(self, rhs: Scalar) -> Scalar {
        &self / &rhs
    }
}

impl Div<&Scalar> for Scalar {
    type Output = Scalar;
    fn div(self, rhs: &Scalar) -> Scalar {
        &self / rhs
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar(-self.0)
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar(-&self.0)
    }
}

impl Sum for Scalar {
    fn sum<I: Iterator<Item = Scalar>>(iter: I) -> Scalar {
        iter.fold(Scalar::zero(), |acc, x| acc + x)
    }
}

impl From<i64> for Scalar {
    fn from(value: i64) -> Self {
        Scalar::integer(value)
    }
}

impl From<BigRational> for Scalar {
    fn from(value: BigRational) -> Self {
        Scalar(value)
    }
}
