//! Bit-level arithmetic on nonnegative integers and dyadic points of `[0, 1)`.
//!
//! Integers are arbitrary precision: exponents produced by divergence plans
//! routinely exceed 64 bits. Points are dyadic rationals `k / 2^M`, which is
//! all the Walsh–Paley machinery ever needs, since every quantity of interest
//! depends on finitely many Rademacher digits.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::DyadicError;

/// Index `j` of a binary digit `n_j` or of a Rademacher function `r_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BitIndex(pub u64);

impl From<u64> for BitIndex {
    fn from(value: u64) -> Self {
        BitIndex(value)
    }
}

/// The point `numerator / 2^resolution` of `[0, 1)`. Serialized as
/// `"k/2^M"`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct DyadicPoint {
    numerator: BigUint,
    resolution: u64,
}

impl DyadicPoint {
    pub fn new(numerator: BigUint, resolution: u64) -> Result<Self, DyadicError> {
        if numerator.bits() > resolution {
            return Err(DyadicError::PointOutOfRange {
                numerator: numerator.to_string(),
                resolution,
            });
        }
        Ok(DyadicPoint {
            numerator,
            resolution,
        })
    }

    /// The left endpoint of grid cell `index` at resolution `resolution`.
    pub fn cell(index: u64, resolution: u32) -> Self {
        assert!(
            resolution >= 64 || index >> resolution == 0,
            "cell {index} outside a grid of 2^{resolution} cells"
        );
        DyadicPoint {
            numerator: BigUint::from(index),
            resolution: u64::from(resolution),
        }
    }

    pub fn zero() -> Self {
        DyadicPoint {
            numerator: BigUint::zero(),
            resolution: 0,
        }
    }

    pub fn numerator(&self) -> &BigUint {
        &self.numerator
    }

    pub fn resolution(&self) -> u64 {
        self.resolution
    }

    /// Strips common factors of two, so that equal points compare equal.
    pub fn reduced(&self) -> DyadicPoint {
        if self.numerator.is_zero() {
            return DyadicPoint::zero();
        }
        let tz = self.numerator.trailing_zeros().unwrap_or(0).min(self.resolution);
        DyadicPoint {
            numerator: &self.numerator >> tz,
            resolution: self.resolution - tz,
        }
    }

    /// Whether the digit `x_{j+1}` of the binary fraction `x = 0.x_1 x_2 …`
    /// equals one, i.e. whether `r_j(x) = -1`.
    pub fn digit(&self, j: u64) -> bool {
        if j >= self.resolution {
            return false;
        }
        self.numerator.bit(self.resolution - 1 - j)
    }

    /// Index of the cell of length `2^{-resolution}` that contains the point.
    pub fn cell_index(&self, resolution: u32) -> u64 {
        let res = u64::from(resolution);
        let k = if self.resolution >= res {
            &self.numerator >> (self.resolution - res)
        } else {
            &self.numerator << (res - self.resolution)
        };
        k.iter_u64_digits().next().unwrap_or(0)
    }

    pub fn to_f64(&self) -> f64 {
        let r = self.reduced();
        let bits = r.numerator.bits();
        if bits <= 53 {
            let n = r.numerator.iter_u64_digits().next().unwrap_or(0) as f64;
            n * 2f64.powi(-(r.resolution.min(2000) as i32))
        } else {
            let shift = bits - 53;
            let top = (&r.numerator >> shift).iter_u64_digits().next().unwrap_or(0) as f64;
            top * 2f64.powf(shift as f64 - r.resolution as f64)
        }
    }
}

impl PartialEq for DyadicPoint {
    fn eq(&self, other: &Self) -> bool {
        let (a, b) = (self.reduced(), other.reduced());
        a.resolution == b.resolution && a.numerator == b.numerator
    }
}

impl Eq for DyadicPoint {}

impl fmt::Display for DyadicPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/2^{}", self.numerator, self.resolution)
    }
}

impl From<DyadicPoint> for String {
    fn from(x: DyadicPoint) -> String {
        x.to_string()
    }
}

impl TryFrom<String> for DyadicPoint {
    type Error = DyadicError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl std::str::FromStr for DyadicPoint {
    type Err = DyadicError;

    /// Accepts `k/2^M`, `k/<power of two>` or `0`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DyadicError::Parse(s.to_string());
        let s = s.trim();
        let Some((num, den)) = s.split_once('/') else {
            let n: BigUint = s.parse().map_err(|_| bad())?;
            return if n.is_zero() {
                Ok(DyadicPoint::zero())
            } else {
                Err(bad())
            };
        };
        let numerator: BigUint = num.trim().parse().map_err(|_| bad())?;
        let den = den.trim();
        let resolution = if let Some(exp) = den.strip_prefix("2^") {
            exp.parse::<u64>().map_err(|_| bad())?
        } else {
            let d: BigUint = den.parse().map_err(|_| bad())?;
            if d.is_zero() || d.count_ones() != 1 {
                return Err(bad());
            }
            d.bits() - 1
        };
        DyadicPoint::new(numerator, resolution)
    }
}

/// Binary digits `(n_0, n_1, …)` of `n`, least significant first, without
/// trailing zeros.
pub fn binary_digits(n: &BigUint) -> Vec<u8> {
    (0..n.bits()).map(|j| u8::from(n.bit(j))).collect()
}

/// `|n|`, the index of the highest set bit. Undefined (rejected) for zero.
pub fn top_bit(n: &BigUint) -> Result<u64, DyadicError> {
    if n.is_zero() {
        return Err(DyadicError::TopBitOfZero);
    }
    Ok(n.bits() - 1)
}

/// Dyadic sum `n ⊕ m`: digitwise `|n_j - m_j|`, which is exclusive or.
pub fn dyadic_sum(n: &BigUint, m: &BigUint) -> BigUint {
    n ^ m
}

/// `r_j(x) = (-1)^{⌊2^{j+1} x⌋}`.
pub fn rademacher(j: BitIndex, x: &DyadicPoint) -> i8 {
    if x.digit(j.0) {
        -1
    } else {
        1
    }
}

/// `r_j` at the left endpoint of cell `cell` of a grid of `2^resolution`
/// cells.
#[inline]
pub fn rademacher_cell(j: u32, cell: u64, resolution: u32) -> i8 {
    if j >= resolution || (cell >> (resolution - 1 - j)) & 1 == 0 {
        1
    } else {
        -1
    }
}

/// Reverses the lowest `bits` bits of `i`.
#[inline]
pub fn reverse_bits(i: u64, bits: u32) -> u64 {
    if bits == 0 {
        0
    } else {
        i.reverse_bits() >> (64 - bits)
    }
}

pub(crate) fn pow2(k: u64) -> BigUint {
    BigUint::one() << k
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(n: u64) -> BigUint {
        BigUint::from(n)
    }

    fn digits_by_division(mut n: u64) -> Vec<u8> {
        let mut out = Vec::new();
        while n > 0 {
            out.push((n % 2) as u8);
            n /= 2;
        }
        out
    }

    #[test]
    fn binary_digits_examples() {
        assert!(binary_digits(&big(0)).is_empty());
        assert_eq!(binary_digits(&big(6)), vec![0, 1, 1]);
        let d = binary_digits(&(BigUint::one() << 70u32));
        assert_eq!(d.len(), 71);
        assert_eq!(d.iter().filter(|&&b| b == 1).count(), 1);
        assert_eq!(d[70], 1);
    }

    #[test]
    fn binary_digits_roundtrip_exhaustive() {
        for n in 0u64..(1 << 16) {
            let d = binary_digits(&big(n));
            assert_eq!(d, digits_by_division(n));
            let back: u64 = d.iter().enumerate().map(|(j, &b)| u64::from(b) << j).sum();
            assert_eq!(back, n);
        }
    }

    #[test]
    fn top_bit_examples() {
        assert_eq!(top_bit(&big(1)).unwrap(), 0);
        assert_eq!(top_bit(&big(12)).unwrap(), 3);
        assert_eq!(top_bit(&(BigUint::one() << 200u32)).unwrap(), 200);
        assert!(matches!(top_bit(&big(0)), Err(DyadicError::TopBitOfZero)));
        for n in 1u64..5000 {
            let t = top_bit(&big(n)).unwrap();
            assert!(1 << t <= n && n < 1 << (t + 1));
        }
    }

    #[test]
    fn dyadic_sum_examples() {
        assert_eq!(dyadic_sum(&big(5), &big(3)), big(6));
        assert_eq!(dyadic_sum(&big(77), &big(77)), big(0));
        assert_eq!(dyadic_sum(&big(77), &big(0)), big(77));
    }

    #[test]
    fn dyadic_sum_group_law_exhaustive() {
        let digitwise = |n: u64, m: u64| -> u64 {
            (0..11).map(|j| (((n >> j) & 1).abs_diff((m >> j) & 1)) << j).sum()
        };
        for n in 0u64..1024 {
            for m in 0u64..1024 {
                let s = dyadic_sum(&big(n), &big(m));
                assert_eq!(s, big(digitwise(n, m)));
                assert_eq!(s, dyadic_sum(&big(m), &big(n)));
                assert_eq!(dyadic_sum(&s, &big(m)), big(n));
            }
        }
        for n in (0u64..1024).step_by(7) {
            for m in (0u64..1024).step_by(5) {
                for p in (0u64..1024).step_by(3) {
                    let l = dyadic_sum(&dyadic_sum(&big(n), &big(m)), &big(p));
                    let r = dyadic_sum(&big(n), &dyadic_sum(&big(m), &big(p)));
                    assert_eq!(l, r);
                }
            }
        }
    }

    #[test]
    fn rademacher_examples() {
        assert_eq!(rademacher(BitIndex(0), &DyadicPoint::zero()), 1);
        let x: DyadicPoint = "3/8".parse().unwrap();
        assert_eq!(rademacher(BitIndex(1), &x), -1);
        for k in 0u64..16 {
            let x = DyadicPoint::cell(k, 4);
            for j in 4..10 {
                assert_eq!(rademacher(BitIndex(j), &x), 1);
            }
        }
    }

    #[test]
    fn rademacher_matches_floor_formula() {
        // (-1)^{floor(2^{j+1} k / 2^M)} computed with plain integer division.
        let m = 7u32;
        for k in 0u64..(1 << m) {
            let x = DyadicPoint::cell(k, m);
            for j in 0..10u32 {
                let fl = (k << (j + 1)) >> m;
                let expect = if fl % 2 == 0 { 1 } else { -1 };
                assert_eq!(rademacher(BitIndex(u64::from(j)), &x), expect);
                assert_eq!(rademacher_cell(j, k, m), expect);
            }
        }
    }

    #[test]
    fn rademacher_is_balanced() {
        for j in 0u32..8 {
            let res = j + 1;
            let plus = (0u64..(1 << res))
                .filter(|&k| rademacher_cell(j, k, res) == 1)
                .count();
            assert_eq!(plus, 1 << j);
        }
    }

    #[test]
    fn points_compare_reduced() {
        let a: DyadicPoint = "2/2^3".parse().unwrap();
        let b: DyadicPoint = "1/4".parse().unwrap();
        assert_eq!(a, b);
        assert_ne!(a, "3/8".parse::<DyadicPoint>().unwrap());
        assert!("8/8".parse::<DyadicPoint>().is_err());
        assert!("1/3".parse::<DyadicPoint>().is_err());
        assert_eq!("5/2^3".parse::<DyadicPoint>().unwrap().cell_index(5), 20);
        assert_eq!("5/2^3".parse::<DyadicPoint>().unwrap().cell_index(1), 1);
    }
}
