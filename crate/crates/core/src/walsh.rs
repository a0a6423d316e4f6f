//! Walsh–Paley functions, the fast Walsh–Hadamard transform in Paley order,
//! Walsh coefficients, partial sums and spectra of grid functions.
//!
//! At resolution `M` the cell `i` covers `[i/2^M, (i+1)/2^M)` and
//! `r_j = (-1)^{bit (M-1-j) of i}`, so `w_n(i/2^M) = (-1)^{popcount(n & rev_M(i))}`.
//! The Paley transform is therefore the natural-order Hadamard transform of
//! the bit-reversed samples.

use std::collections::BTreeSet;

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{reverse_bits, DyadicPoint};
use crate::error::WalshError;
use crate::scalar::{Scalar, FLOAT_EQ_TOL};

/// Grids at or above this resolution run their butterflies in parallel.
const PARALLEL_RESOLUTION: u32 = 14;

/// A real function on `[0, 1)` that is constant on the `2^M` dyadic cells of
/// length `2^{-M}`; equivalently a Walsh polynomial of degree `< 2^M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction<T> {
    resolution: u32,
    values: Vec<T>,
}

/// Walsh–Paley coefficients `f̂(0), …, f̂(2^M - 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumVector<T> {
    resolution: u32,
    coeffs: Vec<T>,
}

/// `Spec(P)`, the frequencies with nonzero coefficient.
pub type SpectrumSet = BTreeSet<u64>;

fn resolution_of(len: usize) -> Result<u32, WalshError> {
    if len == 0 || !len.is_power_of_two() {
        return Err(WalshError::NotPowerOfTwo(len));
    }
    Ok(len.trailing_zeros())
}

impl<T: Scalar> GridFunction<T> {
    pub fn new(values: Vec<T>) -> Result<Self, WalshError> {
        let resolution = resolution_of(values.len())?;
        Ok(GridFunction { resolution, values })
    }

    pub fn from_fn(resolution: u32, f: impl Fn(u64) -> T) -> Self {
        let values = (0..1u64 << resolution).map(f).collect();
        GridFunction { resolution, values }
    }

    pub fn constant(resolution: u32, c: T) -> Self {
        GridFunction {
            resolution,
            values: vec![c; 1 << resolution],
        }
    }

    /// Samples of `w_n` at resolution `resolution`.
    pub fn walsh(resolution: u32, n: u64) -> Self {
        Self::from_fn(resolution, |i| T::from_i64(i64::from(walsh_cell(n, i, resolution))))
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, x: &DyadicPoint) -> &T {
        &self.values[x.cell_index(self.resolution) as usize]
    }

    /// `α f + β g` on a common grid.
    pub fn combine(&self, alpha: &T, other: &Self, beta: &T) -> Result<Self, WalshError> {
        if self.resolution != other.resolution {
            return Err(WalshError::ResolutionMismatch {
                left: self.resolution,
                right: other.resolution,
            });
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| alpha.mul(a).add(&beta.mul(b)))
            .collect();
        Ok(GridFunction {
            resolution: self.resolution,
            values,
        })
    }

    /// Exact quadrature `∫|f|`.
    pub fn l1_norm(&self) -> T {
        let mut acc = T::zero();
        for v in &self.values {
            acc.add_assign(&v.abs());
        }
        acc.div_pow2(self.resolution)
    }

    /// `∫ f²`.
    pub fn l2_norm_sq(&self) -> T {
        let mut acc = T::zero();
        for v in &self.values {
            acc.add_assign(&v.mul(v));
        }
        acc.div_pow2(self.resolution)
    }

    pub fn sup_norm(&self) -> T {
        let mut best = T::zero();
        for v in &self.values {
            let a = v.abs();
            if a > best {
                best = a;
            }
        }
        best
    }

    /// Re-samples onto the finer grid of resolution `resolution`.
    pub fn refine(&self, resolution: u32) -> Self {
        assert!(resolution >= self.resolution);
        let shift = resolution - self.resolution;
        Self::from_fn(resolution, |i| self.values[(i >> shift) as usize].clone())
    }
}

impl<T: Scalar> SpectrumVector<T> {
    pub fn new(coeffs: Vec<T>) -> Result<Self, WalshError> {
        let resolution = resolution_of(coeffs.len())?;
        Ok(SpectrumVector { resolution, coeffs })
    }

    pub fn unit(resolution: u32, k: u64) -> Self {
        let mut coeffs = vec![T::zero(); 1 << resolution];
        coeffs[k as usize] = T::one();
        SpectrumVector { resolution, coeffs }
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    pub fn energy(&self) -> T {
        let mut acc = T::zero();
        for c in &self.coeffs {
            acc.add_assign(&c.mul(c));
        }
        acc
    }

    /// `S_n(f; x)` from the coefficients, `S_0 = 0`. Indices beyond the grid
    /// are clamped: `S_n = f` for `n >= 2^M`.
    pub fn partial_sum(&self, n: u64, x: &DyadicPoint) -> PartialSum<T> {
        let cell = x.cell_index(self.resolution);
        let len = self.coeffs.len() as u64;
        let clamped = n > len;
        let mut acc = T::zero();
        for k in 0..n.min(len) {
            let c = &self.coeffs[k as usize];
            if walsh_cell(k, cell, self.resolution) > 0 {
                acc.add_assign(c);
            } else {
                acc = acc.sub(c);
            }
        }
        PartialSum {
            value: acc,
            clamped,
        }
    }

    /// `S_0, …, S_{n_max}` at one grid cell, by one incremental pass.
    pub fn partial_sum_column(&self, cell: u64, n_max: u64) -> Vec<T> {
        let len = self.coeffs.len() as u64;
        let mut out = Vec::with_capacity(n_max as usize + 1);
        let rev = reverse_bits(cell, self.resolution);
        let mut acc = T::zero();
        out.push(acc.clone());
        for k in 0..n_max {
            if k < len {
                let c = &self.coeffs[k as usize];
                if (k & rev).count_ones() % 2 == 0 {
                    acc.add_assign(c);
                } else {
                    acc = acc.sub(c);
                }
            }
            out.push(acc.clone());
        }
        out
    }
}

/// Value of `S_n(f; x)` with a flag set when `n` exceeded `2^M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialSum<T> {
    pub value: T,
    pub clamped: bool,
}

/// `w_n` on cell `cell` of a grid of resolution `resolution`, for `n < 2^M`.
/// Frequencies with digits at or beyond `M` are evaluated as if their high
/// Rademacher factors were `+1`, which is exact at the cell's left endpoint.
#[inline]
pub fn walsh_cell(n: u64, cell: u64, resolution: u32) -> i8 {
    if (n & reverse_bits(cell, resolution)).count_ones() % 2 == 0 {
        1
    } else {
        -1
    }
}

/// `w_n(x) = ∏_j r_j(x)^{n_j}`.
pub fn walsh_eval(n: &BigUint, x: &DyadicPoint) -> i8 {
    let limit = n.bits().min(x.resolution());
    let mut negative = false;
    for j in 0..limit {
        if n.bit(j) && x.digit(j) {
            negative = !negative;
        }
    }
    if negative {
        -1
    } else {
        1
    }
}

/// In-place natural-order Hadamard butterflies, unnormalized.
pub fn hadamard_in_place<T: Scalar>(data: &mut [T]) {
    let n = data.len();
    debug_assert!(n.is_power_of_two());
    let parallel = n >= 1 << PARALLEL_RESOLUTION;
    let mut half = 1;
    while half < n {
        let span = 2 * half;
        let step = |block: &mut [T]| {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let sum = a.add(b);
                *b = a.sub(b);
                *a = sum;
            }
        };
        if parallel {
            data.par_chunks_mut(span).for_each(step);
        } else {
            data.chunks_mut(span).for_each(step);
        }
        half = span;
    }
}

/// Integer butterflies, used for the scaled-integer block polynomial.
pub fn hadamard_in_place_i64(data: &mut [i64]) {
    let n = data.len();
    let mut half = 1;
    while half < n {
        for block in data.chunks_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        half *= 2;
    }
}

pub(crate) fn bit_reverse_permute<T>(data: &mut [T]) {
    let bits = data.len().trailing_zeros();
    for i in 0..data.len() as u64 {
        let j = reverse_bits(i, bits);
        if i < j {
            data.swap(i as usize, j as usize);
        }
    }
}

/// `f̂(k) = 2^{-M} Σ_i f_i w_k(i/2^M)` for all `k < 2^M` in `O(M 2^M)`.
pub fn forward_fwht<T: Scalar>(f: &GridFunction<T>) -> SpectrumVector<T> {
    let mut data = f.values.clone();
    bit_reverse_permute(&mut data);
    hadamard_in_place(&mut data);
    let m = f.resolution;
    let coeffs = if m >= PARALLEL_RESOLUTION {
        data.par_iter().map(|c| c.div_pow2(m)).collect()
    } else {
        data.iter().map(|c| c.div_pow2(m)).collect()
    };
    SpectrumVector {
        resolution: m,
        coeffs,
    }
}

/// Synthesis `f = Σ_k c_k w_k`.
pub fn inverse_fwht<T: Scalar>(c: &SpectrumVector<T>) -> GridFunction<T> {
    let mut data = c.coeffs.clone();
    hadamard_in_place(&mut data);
    bit_reverse_permute(&mut data);
    GridFunction {
        resolution: c.resolution,
        values: data,
    }
}

/// `S_n(f; x)`, the Walsh–Fourier series truncated to frequencies `< n`.
pub fn partial_sum<T: Scalar>(f: &GridFunction<T>, n: u64, x: &DyadicPoint) -> PartialSum<T> {
    forward_fwht(f).partial_sum(n, x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PartialSumStrategy {
    /// `S_{n+1} = S_n + f̂(n) w_n`, `O(4^M)` scalar updates.
    #[default]
    Incremental,
    /// One inverse transform of the truncated spectrum per row, `O(M 4^M)`.
    RowInverse,
}

/// Upper bound on the resolution of dense `(2^M + 1) × 2^M` matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenseBudget {
    pub max_resolution: u32,
}

impl Default for DenseBudget {
    fn default() -> Self {
        DenseBudget { max_resolution: 12 }
    }
}

impl DenseBudget {
    pub fn check(&self, resolution: u32) -> Result<(), WalshError> {
        if resolution > self.max_resolution {
            Err(WalshError::Budget {
                requested: resolution,
                limit: self.max_resolution,
            })
        } else {
            Ok(())
        }
    }
}

/// `rows[n][i] = S_n(f; i/2^M)` for `0 <= n <= 2^M`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialSumMatrix<T> {
    pub resolution: u32,
    pub rows: Vec<Vec<T>>,
}

pub fn partial_sum_all<T: Scalar>(
    f: &GridFunction<T>,
    strategy: PartialSumStrategy,
    budget: DenseBudget,
) -> Result<PartialSumMatrix<T>, WalshError> {
    budget.check(f.resolution)?;
    let spec = forward_fwht(f);
    let m = f.resolution;
    let len = 1u64 << m;
    let rows = match strategy {
        PartialSumStrategy::Incremental => {
            let mut rows = Vec::with_capacity(len as usize + 1);
            let mut current = vec![T::zero(); len as usize];
            rows.push(current.clone());
            for k in 0..len {
                let c = &spec.coeffs[k as usize];
                current.par_iter_mut().enumerate().for_each(|(i, s)| {
                    if walsh_cell(k, i as u64, m) > 0 {
                        s.add_assign(c);
                    } else {
                        *s = s.sub(c);
                    }
                });
                rows.push(current.clone());
            }
            rows
        }
        PartialSumStrategy::RowInverse => (0..=len)
            .into_par_iter()
            .map(|n| {
                let coeffs = spec
                    .coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, c)| if (k as u64) < n { c.clone() } else { T::zero() })
                    .collect();
                inverse_fwht(&SpectrumVector {
                    resolution: m,
                    coeffs,
                })
                .values
            })
            .collect(),
    };
    Ok(PartialSumMatrix { resolution: m, rows })
}

/// `Spec(f)`: literal nonzero coefficients in exact mode, `|f̂(k)| > 1e-12 ·
/// max|f̂|` in floating mode.
pub fn spectrum<T: Scalar>(f: &GridFunction<T>) -> SpectrumSet {
    spectrum_of(&forward_fwht(f))
}

pub fn spectrum_of<T: Scalar>(spec: &SpectrumVector<T>) -> SpectrumSet {
    let max = spec
        .coeffs
        .iter()
        .map(|c| c.to_f64().abs())
        .fold(0.0, f64::max);
    spec.coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| match T::MODE {
            crate::scalar::NumberMode::Exact => !c.is_zero(),
            crate::scalar::NumberMode::Floating => c.to_f64().abs() > FLOAT_EQ_TOL * max,
        })
        .map(|(k, _)| k as u64)
        .collect()
}

/// Paley index of the natural-order (Hadamard) row `h`.
pub fn hadamard_to_paley(h: u64, resolution: u32) -> u64 {
    reverse_bits(h, resolution)
}

pub fn paley_to_hadamard(n: u64, resolution: u32) -> u64 {
    reverse_bits(n, resolution)
}

/// Paley index of the Walsh function with `k` sign changes (sequency order).
pub fn sequency_to_paley(k: u64) -> u64 {
    k ^ (k >> 1)
}

pub fn paley_to_sequency(n: u64) -> u64 {
    let mut k = n;
    let mut shift = 1;
    while shift < 64 {
        k ^= k >> shift;
        shift <<= 1;
    }
    k
}

/// Reorders Paley-indexed coefficients into Hadamard order.
pub fn reorder_paley_to_hadamard<T: Clone>(coeffs: &[T]) -> Vec<T> {
    let bits = coeffs.len().trailing_zeros();
    (0..coeffs.len() as u64)
        .map(|h| coeffs[hadamard_to_paley(h, bits) as usize].clone())
        .collect()
}

/// Reorders Paley-indexed coefficients into sequency order.
pub fn reorder_paley_to_sequency<T: Clone>(coeffs: &[T]) -> Vec<T> {
    (0..coeffs.len() as u64)
        .map(|k| coeffs[sequency_to_paley(k) as usize].clone())
        .collect()
}
