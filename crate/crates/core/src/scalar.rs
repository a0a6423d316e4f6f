//! Number modes shared by the transform and summability code.
//!
//! Grid functions are generic over [`Scalar`]: `f64` (floating mode) or
//! [`BigRational`] (exact mode). Dyadic-step functions have exact Walsh
//! coefficients, so exact mode never rounds.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// Relative tolerance for elementwise equality in floating mode.
pub const FLOAT_EQ_TOL: f64 = 1e-12;
/// Relative tolerance for derived aggregates (norms, means) in floating mode.
pub const FLOAT_AGG_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NumberMode {
    Exact,
    #[default]
    Floating,
}

impl std::str::FromStr for NumberMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(NumberMode::Exact),
            "floating" | "float" => Ok(NumberMode::Floating),
            other => Err(format!("unknown number mode {other:?}")),
        }
    }
}

pub trait Scalar: Clone + PartialEq + PartialOrd + fmt::Debug + Send + Sync + 'static {
    const MODE: NumberMode;

    fn zero() -> Self;
    fn from_i64(v: i64) -> Self;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn add_assign(&mut self, other: &Self);
    fn neg(&self) -> Self;
    fn abs(&self) -> Self;
    fn div_pow2(&self, k: u32) -> Self;
    fn div_u64(&self, d: u64) -> Self;
    fn to_f64(&self) -> f64;
    fn is_zero(&self) -> bool;
    /// Serialized form: decimal for floats, `p/q` for rationals.
    fn to_text(&self) -> String;
    fn from_text(s: &str) -> Option<Self>;

    fn one() -> Self {
        Self::from_i64(1)
    }

    fn from_rational(r: &BigRational) -> Self;

    /// Equality under the mode's rule: literal in exact mode, relative
    /// `tol` in floating mode.
    fn mode_eq(&self, other: &Self, scale: f64, tol: f64) -> bool;
}

impl Scalar for f64 {
    const MODE: NumberMode = NumberMode::Floating;

    fn zero() -> Self {
        0.0
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    #[inline]
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    #[inline]
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    #[inline]
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    #[inline]
    fn add_assign(&mut self, other: &Self) {
        *self += other;
    }
    #[inline]
    fn neg(&self) -> Self {
        -self
    }
    #[inline]
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn div_pow2(&self, k: u32) -> Self {
        self * 2f64.powi(-(k as i32))
    }
    fn div_u64(&self, d: u64) -> Self {
        self / d as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn to_text(&self) -> String {
        // Rust's Display is the shortest representation that round-trips.
        format!("{self}")
    }
    fn from_text(s: &str) -> Option<Self> {
        if let Ok(v) = s.trim().parse() {
            return Some(v);
        }
        parse_rational(s).and_then(|r| ToPrimitive::to_f64(&r))
    }
    fn from_rational(r: &BigRational) -> Self {
        ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
    }
    fn mode_eq(&self, other: &Self, scale: f64, tol: f64) -> bool {
        f64::abs(self - other) <= tol * scale.max(f64::abs(*self)).max(f64::abs(*other)).max(f64::MIN_POSITIVE)
    }
}

impl Scalar for BigRational {
    const MODE: NumberMode = NumberMode::Exact;

    fn zero() -> Self {
        Zero::zero()
    }
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn add_assign(&mut self, other: &Self) {
        *self += other;
    }
    fn neg(&self) -> Self {
        -self
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
    fn div_pow2(&self, k: u32) -> Self {
        self / BigRational::from_integer(BigInt::one() << k)
    }
    fn div_u64(&self, d: u64) -> Self {
        self / BigRational::from_integer(BigInt::from(d))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn to_text(&self) -> String {
        rational_text(self)
    }
    fn from_text(s: &str) -> Option<Self> {
        parse_rational(s)
    }
    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }
    fn mode_eq(&self, other: &Self, _scale: f64, _tol: f64) -> bool {
        self == other
    }
}

/// `p/q` or `p` for integers.
pub fn rational_text(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `p/q`, an integer, or a finite decimal such as `-0.125` or `1e-3`
/// into an exact rational.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().ok()?;
        let q: BigInt = q.trim().parse().ok()?;
        if q.is_zero() {
            return None;
        }
        return Some(BigRational::new(p, q));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let mut num: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().ok()?
    };
    if neg {
        num = -num;
    }
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    Some(if scale >= 0 {
        BigRational::from_integer(num * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(num, num_traits::pow(ten, (-scale) as usize))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(p: i64, q: i64) -> BigRational {
        BigRational::new(BigInt::from(p), BigInt::from(q))
    }

    #[test]
    fn parses_rationals() {
        assert_eq!(parse_rational("1/4"), Some(rat(1, 4)));
        assert_eq!(parse_rational("0.5"), Some(rat(1, 2)));
        assert_eq!(parse_rational("-0.125"), Some(rat(-1, 8)));
        assert_eq!(parse_rational("3"), Some(rat(3, 1)));
        assert_eq!(parse_rational("25e-2"), Some(rat(1, 4)));
        assert_eq!(parse_rational(".5"), Some(rat(1, 2)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("abc"), None);
        assert_eq!(parse_rational("."), None);
    }

    #[test]
    fn text_roundtrip() {
        let r = rat(-22, 7);
        assert_eq!(r.to_text(), "-22/7");
        assert_eq!(BigRational::from_text(&r.to_text()), Some(r));
        let x = 0.1f64 + 0.2;
        assert_eq!(f64::from_text(&x.to_text()), Some(x));
    }
}
