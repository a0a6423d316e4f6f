//! Exact sums `Σ c_s √s` with rational `c_s` and distinct squarefree `s`.
//!
//! Square roots of distinct squarefree integers are linearly independent
//! over the rationals, so the canonical form is unique: a sum is zero iff
//! every coefficient is zero, and a nonzero sum has a sign that interval
//! refinement of the square roots always decides.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::scalar::rational_text;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SurdSum {
    terms: BTreeMap<u64, BigRational>,
}

/// `n = k² s` with `s` squarefree.
pub fn squarefree_split(n: u64) -> (u64, u64) {
    assert!(n > 0, "squarefree_split(0)");
    let mut k = 1u64;
    let mut s = 1u64;
    let mut rest = n;
    let mut p = 2u64;
    while p * p <= rest {
        let mut e = 0;
        while rest % p == 0 {
            rest /= p;
            e += 1;
        }
        k *= p.pow(e / 2);
        if e % 2 == 1 {
            s *= p;
        }
        p += if p == 2 { 1 } else { 2 };
    }
    (k, s * rest)
}

impl SurdSum {
    pub fn zero() -> Self {
        SurdSum::default()
    }

    pub fn rational(c: BigRational) -> Self {
        Self::term(c, 1)
    }

    /// `c √n`.
    pub fn term(c: BigRational, n: u64) -> Self {
        let mut out = SurdSum::zero();
        if n == 0 || c.is_zero() {
            return out;
        }
        let (k, s) = squarefree_split(n);
        out.terms.insert(s, c * BigInt::from(k));
        out
    }

    /// `c / √n = c √s / (k s)` for `n = k² s`.
    pub fn over_sqrt(c: BigRational, n: u64) -> Self {
        assert!(n > 0, "division by sqrt(0)");
        let (k, s) = squarefree_split(n);
        let mut out = SurdSum::zero();
        if !c.is_zero() {
            out.terms.insert(s, c / BigInt::from(k * s));
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (u64, &BigRational)> {
        self.terms.iter().map(|(s, c)| (*s, c))
    }

    pub fn add_assign(&mut self, other: &SurdSum) {
        for (s, c) in &other.terms {
            let entry = self.terms.entry(*s).or_insert_with(BigRational::zero);
            *entry += c;
            if entry.is_zero() {
                self.terms.remove(s);
            }
        }
    }

    pub fn add(&self, other: &SurdSum) -> SurdSum {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn sub(&self, other: &SurdSum) -> SurdSum {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> SurdSum {
        SurdSum {
            terms: self.terms.iter().map(|(s, c)| (*s, -c)).collect(),
        }
    }

    pub fn scale(&self, r: &BigRational) -> SurdSum {
        if r.is_zero() {
            return SurdSum::zero();
        }
        SurdSum {
            terms: self.terms.iter().map(|(s, c)| (*s, c * r)).collect(),
        }
    }

    pub fn signum(&self) -> Ordering {
        if self.terms.is_empty() {
            return Ordering::Equal;
        }
        if self.terms.len() == 1 {
            let c = self.terms.values().next().expect("one term");
            return if c.is_positive() {
                Ordering::Greater
            } else {
                Ordering::Less
            };
        }
        // Clear denominators, then bracket each 2^p √s between consecutive
        // integers and refine until the bracket excludes zero.
        let denom = self
            .terms
            .values()
            .fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        let coeffs: Vec<(u64, BigInt)> = self
            .terms
            .iter()
            .map(|(s, c)| (*s, c.numer() * (&denom / c.denom())))
            .collect();
        let mut p = 64u64;
        loop {
            let mut mid = BigInt::zero();
            let mut slack_lo = BigInt::zero();
            let mut slack_hi = BigInt::zero();
            for (s, a) in &coeffs {
                if *s == 1 {
                    mid += a << p;
                    continue;
                }
                let r = (BigInt::from(*s) << (2 * p)).sqrt();
                mid += a * r;
                match a.sign() {
                    Sign::Minus => slack_lo += a,
                    _ => slack_hi += a,
                }
            }
            if &mid + &slack_lo > BigInt::zero() {
                return Ordering::Greater;
            }
            if &mid + &slack_hi < BigInt::zero() {
                return Ordering::Less;
            }
            p *= 2;
        }
    }

    pub fn abs(&self) -> SurdSum {
        if self.signum() == Ordering::Less {
            self.neg()
        } else {
            self.clone()
        }
    }

    pub fn cmp_exact(&self, other: &SurdSum) -> Ordering {
        self.sub(other).signum()
    }

    pub fn gt(&self, other: &SurdSum) -> bool {
        self.cmp_exact(other) == Ordering::Greater
    }

    pub fn ge(&self, other: &SurdSum) -> bool {
        self.cmp_exact(other) != Ordering::Less
    }

    pub fn to_f64(&self) -> f64 {
        self.terms
            .iter()
            .map(|(s, c)| big_ratio_f64(c) * (*s as f64).sqrt())
            .sum()
    }

    /// A rational `lo` with `lo <= self`, within `2^{-bits}` relative to the
    /// largest coefficient.
    pub fn lower_bound(&self, bits: u64) -> BigRational {
        let scale = BigInt::one() << bits;
        self.terms
            .iter()
            .map(|(s, c)| {
                if *s == 1 {
                    return c.clone();
                }
                let r = (BigInt::from(*s) << (2 * bits)).sqrt();
                let root_lo = BigRational::new(r.clone(), scale.clone());
                let root_hi = BigRational::new(r + 1, scale.clone());
                if c.is_positive() {
                    c * root_lo
                } else {
                    c * root_hi
                }
            })
            .fold(BigRational::zero(), |a, b| a + b)
    }
}

/// `BigRational` to `f64` that survives numerators and denominators beyond
/// the `f64` exponent range.
pub fn big_ratio_f64(r: &BigRational) -> f64 {
    if let Some(v) = r.to_f64().filter(|v| v.is_finite() && *v != 0.0) {
        return v;
    }
    if r.is_zero() {
        return 0.0;
    }
    let nb = r.numer().bits() as i64;
    let db = r.denom().bits() as i64;
    let shift = nb - db;
    let scaled = if shift > 0 {
        BigRational::new(r.numer().clone(), r.denom() << shift as u64)
    } else {
        BigRational::new(r.numer() << (-shift) as u64, r.denom().clone())
    };
    scaled.to_f64().unwrap_or(f64::NAN) * 2f64.powi(shift.clamp(-2000, 2000) as i32)
}

impl fmt::Display for SurdSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(s, c)| {
                if *s == 1 {
                    rational_text(c)
                } else {
                    format!("{}*sqrt({s})", rational_text(c))
                }
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(p: i64, q: i64) -> BigRational {
        BigRational::new(p.into(), q.into())
    }

    #[test]
    fn squarefree() {
        assert_eq!(squarefree_split(1), (1, 1));
        assert_eq!(squarefree_split(8), (2, 2));
        assert_eq!(squarefree_split(72), (6, 2));
        assert_eq!(squarefree_split(4097), (1, 4097));
        assert_eq!(squarefree_split(4096), (64, 1));
        for n in 1..2000u64 {
            let (k, s) = squarefree_split(n);
            assert_eq!(k * k * s, n);
            assert!((2..50).all(|p| s % (p * p) != 0));
        }
    }

    #[test]
    fn canonical_forms_cancel() {
        // 1/√2 - √2/2 = 0, √8 - 2√2 = 0
        let a = SurdSum::over_sqrt(rat(1, 1), 2).sub(&SurdSum::term(rat(1, 2), 2));
        assert!(a.is_zero());
        let b = SurdSum::term(rat(1, 1), 8).sub(&SurdSum::term(rat(2, 1), 2));
        assert!(b.is_zero());
    }

    #[test]
    fn signs_of_close_sums() {
        // √2 + √3 vs √10: 3.1462… vs 3.1623…
        let lhs = SurdSum::term(rat(1, 1), 2).add(&SurdSum::term(rat(1, 1), 3));
        assert!(SurdSum::term(rat(1, 1), 10).gt(&lhs));
        // (3/64)√4097 > 3
        assert!(SurdSum::term(rat(3, 64), 4097).gt(&SurdSum::rational(rat(3, 1))));
        // 3/64 √4096 = 3 exactly
        assert_eq!(SurdSum::term(rat(3, 64), 4096).cmp_exact(&SurdSum::rational(rat(3, 1))), Ordering::Equal);
    }

    #[test]
    fn sign_agrees_with_floats_on_random_sums() {
        use rand::Rng;
        let mut r = crate::random::rng(3);
        for _ in 0..300 {
            let mut s = SurdSum::zero();
            for _ in 0..4 {
                let c = rat(r.gen_range(-50..50), r.gen_range(1..9));
                s.add_assign(&SurdSum::term(c, r.gen_range(1..40)));
            }
            let f = s.to_f64();
            if f.abs() > 1e-9 {
                assert_eq!(s.signum(), f.partial_cmp(&0.0).unwrap(), "{s}");
            }
        }
    }

    #[test]
    fn lower_bound_is_below() {
        let s = SurdSum::term(rat(1, 1), 2).sub(&SurdSum::term(rat(1, 3), 5));
        let lo = s.lower_bound(40);
        assert!(SurdSum::rational(lo.clone()).cmp_exact(&s) != Ordering::Greater);
        assert!((big_ratio_f64(&lo) - s.to_f64()).abs() < 1e-9);
    }

    #[test]
    fn huge_rationals_to_f64() {
        let r = BigRational::new(BigInt::one() << 5000u32, (BigInt::one() << 4990u32) * 3);
        assert!((big_ratio_f64(&r) - 1024.0 / 3.0).abs() < 1e-9);
    }
}
