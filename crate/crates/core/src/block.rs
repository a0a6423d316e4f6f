//! The block polynomial
//! `P_{m,γ} = γ^{-1/2} Σ_{v<2^γ} Σ_{j<γ} w_{μ(v,j)}`,
//! `μ(v,j) = 2^{m-γ} v + 2^{m-2γ} (v ⊕ 2^j)`.
//!
//! Every value is kept as a scaled integer `q` standing for `q/√γ`.
//!
//! With `ρ_j = r_{m-2γ+j}(x)` and `d_k = r_{m-γ+k}(x) r_{m-2γ+k}(x)` the
//! Walsh functions factor as `w_{μ(v,j)}(x) = c_v ρ_j`, `c_v = Π d_k^{v_k}`.
//! Sums of `w_μ` and `μ w_μ` over `μ < K` then reduce to a digit recursion
//! over the bits of `K`, which is what makes partial sums and window means
//! computable at any `(m, γ)` without touching the `γ 2^γ` frequencies.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{dyadic_sum, pow2, rademacher_cell, DyadicPoint};
use crate::error::BlockError;
use crate::scalar::rational_text;
use crate::surd::SurdSum;
use crate::walsh::{bit_reverse_permute, hadamard_in_place_i64, GridFunction};
use crate::window::WindowSequence;

/// Largest `m` for which dense `2^m` grids are built by default.
pub const DEFAULT_MAX_DENSE_M: u64 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockPolynomial {
    m: u64,
    gamma: u64,
}

impl BlockPolynomial {
    pub fn new(m: u64, gamma: u64) -> Result<Self, BlockError> {
        if gamma == 0 || gamma.checked_mul(2).is_none_or(|g2| g2 >= m) {
            return Err(BlockError::Shape { m, gamma });
        }
        Ok(BlockPolynomial { m, gamma })
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn gamma(&self) -> u64 {
        self.gamma
    }

    /// `m - 2γ`, so that the block size is `B = 2^{block_exp}`.
    pub fn block_exp(&self) -> u64 {
        self.m - 2 * self.gamma
    }

    pub fn block_size(&self) -> BigUint {
        pow2(self.block_exp())
    }

    /// `γ 2^γ`.
    pub fn frequency_count(&self) -> BigUint {
        pow2(self.gamma) * self.gamma
    }

    pub fn mu(&self, v: &BigUint, j: u64) -> Result<BigUint, BlockError> {
        mu(self.m, self.gamma, v, j)
    }

    /// All frequencies in increasing order; only for `m <= 63` and at most
    /// `2^24` of them.
    pub fn frequencies(&self) -> Result<Vec<u64>, BlockError> {
        Ok(FrequencyTable::new(self)?.entries.iter().map(|e| e.mu).collect())
    }

    /// `|E_{m,γ}| = 2^{-γ}`.
    pub fn e_measure(&self) -> BigRational {
        BigRational::new(BigInt::one(), BigInt::from(pow2(self.gamma)))
    }

    /// `2^γ √γ = ‖P‖_∞`, scaled: `γ 2^γ`.
    pub fn sup_bound_scaled(&self) -> BigInt {
        BigInt::from(pow2(self.gamma) * self.gamma)
    }
}

pub fn mu(m: u64, gamma: u64, v: &BigUint, j: u64) -> Result<BigUint, BlockError> {
    let bp = BlockPolynomial::new(m, gamma)?;
    if v.bits() > gamma {
        return Err(BlockError::VOutOfRange {
            v: v.to_string(),
            gamma,
        });
    }
    if j >= gamma {
        return Err(BlockError::JOutOfRange { j, gamma });
    }
    Ok((v << (m - gamma)) + (dyadic_sum(v, &pow2(j)) << bp.block_exp()))
}

/// A value `q / √γ`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaledValue {
    #[serde(with = "bigint_text")]
    pub q: BigInt,
    pub gamma: u64,
}

impl ScaledValue {
    pub fn new(q: BigInt, gamma: u64) -> Self {
        ScaledValue { q, gamma }
    }

    /// `|q/√γ| >= √γ/4`, i.e. `4|q| >= γ`.
    pub fn meets_quarter(&self) -> bool {
        BigInt::from(4) * self.q.abs() >= BigInt::from(self.gamma)
    }

    pub fn to_surd(&self) -> SurdSum {
        SurdSum::over_sqrt(BigRational::from_integer(self.q.clone()), self.gamma)
    }

    pub fn to_f64(&self) -> f64 {
        self.q.to_f64().unwrap_or(f64::NAN) / (self.gamma as f64).sqrt()
    }
}

impl std::fmt::Display for ScaledValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/sqrt({})", self.q, self.gamma)
    }
}

pub(crate) mod bigint_text {
    use num_bigint::BigInt;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigInt, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigInt, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub(crate) mod biguint_text {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The digits of `x` that `P_{m,γ}` sees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockDigits {
    /// `ρ_j = r_{m-2γ+j}(x)`
    pub rho: Vec<i8>,
    /// `d_k = r_{m-γ+k}(x) r_{m-2γ+k}(x)`; `x ∈ E_{m,γ}` iff all are `+1`.
    pub d: Vec<i8>,
}

impl BlockDigits {
    pub fn at(bp: &BlockPolynomial, x: &DyadicPoint) -> Self {
        let base = bp.block_exp();
        let g = bp.gamma;
        let r = |j: u64| if x.digit(j) { -1i8 } else { 1 };
        let rho: Vec<i8> = (0..g).map(|j| r(base + j)).collect();
        let d = (0..g).map(|k| r(base + g + k) * rho[k as usize]).collect();
        BlockDigits { rho, d }
    }

    pub fn at_cell(bp: &BlockPolynomial, cell: u64, resolution: u32) -> Self {
        let base = bp.block_exp() as u32;
        let g = bp.gamma as u32;
        let r = |j: u32| rademacher_cell(j, cell, resolution);
        let rho: Vec<i8> = (0..g).map(|j| r(base + j)).collect();
        let d = (0..g).map(|k| r(base + g + k) * rho[k as usize]).collect();
        BlockDigits { rho, d }
    }

    pub fn in_e(&self) -> bool {
        self.d.iter().all(|&v| v == 1)
    }

    /// `Σ_j ρ_j`
    pub fn rho_sum(&self) -> i64 {
        self.rho.iter().map(|&v| i64::from(v)).sum()
    }

    /// `c_v = Π d_k^{v_k}`
    pub fn c(&self, v: &BigUint) -> i8 {
        let mut c = 1i8;
        for (k, &dk) in self.d.iter().enumerate() {
            if dk < 0 && v.bit(k as u64) {
                c = -c;
            }
        }
        c
    }
}

/// `Σ_{j ∈ S} s_j 2^j` for signs `s_j ∈ {±1}` built from bit sets.
fn signed_bits(items: impl Iterator<Item = (u64, i8)>) -> BigInt {
    let mut pos = BigUint::zero();
    let mut neg = BigUint::zero();
    for (j, s) in items {
        if s > 0 {
            pos.set_bit(j, true);
        } else {
            neg.set_bit(j, true);
        }
    }
    BigInt::from(pos) - BigInt::from(neg)
}

/// Scaled partial sums `√γ S_K(P; x) = Σ_{μ<K} w_μ(x)` and their running
/// totals.
pub trait ScaledSums {
    /// `Σ_{μ<K} w_μ(x)`, which is `√γ S_K(P; x)`.
    fn count(&self, k: &BigUint) -> BigInt;
    /// `Σ_{μ<K} μ w_μ(x)`.
    fn moment(&self, k: &BigUint) -> BigInt;

    /// `√γ Σ_{k=0}^{K} S_k = Σ_{μ<K} (K - μ) w_μ`.
    fn cumulative(&self, k: &BigUint) -> BigInt {
        BigInt::from(k.clone()) * self.count(k) - self.moment(k)
    }

    /// `√γ Σ_{k=n-λ}^{n} S_k`, i.e. `(λ+1) √γ V_n` for window length `λ`.
    fn window_sum(&self, n: &BigUint, lambda: &BigUint) -> BigInt {
        let top = self.cumulative(n);
        if lambda >= n {
            top
        } else {
            top - self.cumulative(&(n - lambda - 1u32))
        }
    }
}

/// The digit recursion: `O(γ)` big-integer operations per query, valid for
/// every `(m, γ)`.
#[derive(Debug, Clone)]
pub struct DigitSums {
    bp: BlockPolynomial,
    digits: BlockDigits,
    rho_sum: BigInt,
    /// `Σ_j ρ_j 2^j`
    rho_weighted: BigInt,
    /// Indices with `d_k = -1`, at most the first two.
    zeros: Vec<u64>,
}

impl DigitSums {
    pub fn new(bp: &BlockPolynomial, x: &DyadicPoint) -> Self {
        Self::from_digits(bp, BlockDigits::at(bp, x))
    }

    pub fn from_digits(bp: &BlockPolynomial, digits: BlockDigits) -> Self {
        let rho_sum = BigInt::from(digits.rho_sum());
        let rho_weighted = signed_bits(digits.rho.iter().enumerate().map(|(j, &r)| (j as u64, r)));
        let zeros = digits
            .d
            .iter()
            .enumerate()
            .filter(|(_, &v)| v < 0)
            .map(|(k, _)| k as u64)
            .take(2)
            .collect();
        DigitSums {
            bp: *bp,
            digits,
            rho_sum,
            rho_weighted,
            zeros,
        }
    }

    pub fn digits(&self) -> &BlockDigits {
        &self.digits
    }

    /// `(count, moment)` over `μ < K`.
    pub fn sums(&self, k: &BigUint) -> (BigInt, BigInt) {
        let g = self.bp.gamma;
        let s = self.bp.m - g;
        let b_exp = self.bp.block_exp();
        let k_hi = k >> s;
        let k_lo = k - (&k_hi << s);

        // Σ over v < K_hi of c_v, c_v v and Σ_j ρ_j 2^j c_v v_j.
        let mut c0 = BigInt::zero();
        let mut c1 = BigInt::zero();
        let mut bsum = BigInt::zero();
        let full = k_hi.bits() > g;
        if full {
            self.add_term(g, 1, &BigUint::zero(), &BigInt::zero(), &mut c0, &mut c1, &mut bsum);
        } else {
            // ±1 products of d_k^{K_k} for the bits of K_hi above t.
            let mut suffix_sign = 1i8;
            for t in 0..g {
                if k_hi.bit(t) && self.digits.d[t as usize] < 0 {
                    suffix_sign = -suffix_sign;
                }
            }
            // Σ_{j>t, K_j=1} ρ_j 2^j, shrinking as t rises.
            let mut high = signed_bits(
                (0..g)
                    .filter(|&j| k_hi.bit(j))
                    .map(|j| (j, self.digits.rho[j as usize])),
            );
            let limit = self.zeros.get(1).map_or(g, |&z1| (z1 + 1).min(g));
            for t in 0..limit {
                if !k_hi.bit(t) {
                    continue;
                }
                // drop bit t from the suffix product and the high sum
                if self.digits.d[t as usize] < 0 {
                    suffix_sign = -suffix_sign;
                }
                let rt = self.digits.rho[t as usize];
                if rt > 0 {
                    high -= BigInt::one() << t;
                } else {
                    high += BigInt::one() << t;
                }
                let hi_val = (&k_hi >> (t + 1)) << (t + 1);
                self.add_term(t, suffix_sign, &hi_val, &high, &mut c0, &mut c1, &mut bsum);
            }
        }

        let two_s_plus_b = BigInt::from(pow2(s) + pow2(b_exp));
        let mut count = &c0 * &self.rho_sum;
        let mut moment = &two_s_plus_b * &self.rho_sum * &c1
            + ((&self.rho_weighted * &c0 - (bsum << 1u32)) << b_exp);

        if !full {
            // v = K_hi itself, with j such that B (v ⊕ 2^j) < K_lo.
            let v = &k_hi;
            let bound = k_lo.div_ceil(&pow2(b_exp));
            let included = included_flips(v, &bound, g);
            let cv = BigInt::from(self.digits.c(v));
            let mut rho_in = 0i64;
            let mut signs = Vec::new();
            for j in 0..g {
                if included(j) {
                    let r = self.digits.rho[j as usize];
                    rho_in += i64::from(r);
                    let flip = if v.bit(j) { -r } else { r };
                    signs.push((j, flip));
                }
            }
            let rho_in = BigInt::from(rho_in);
            count += &cv * &rho_in;
            moment += cv
                * (&two_s_plus_b * BigInt::from(v.clone()) * rho_in
                    + (signed_bits(signs.into_iter()) << b_exp));
        }
        (count, moment)
    }

    /// Adds the sums over `v` that agree with `K_hi` above bit `t`, have bit
    /// `t` clear and free bits below; `t = γ` is the whole range.
    #[allow(clippy::too_many_arguments)]
    fn add_term(
        &self,
        t: u64,
        prefix_sign: i8,
        hi_val: &BigUint,
        high: &BigInt,
        c0: &mut BigInt,
        c1: &mut BigInt,
        bsum: &mut BigInt,
    ) {
        let zeros_below: Vec<u64> = self.zeros.iter().copied().filter(|&z| z < t).collect();
        let p = BigInt::from(prefix_sign);
        match zeros_below.len() {
            0 => {
                let free = BigInt::one() << t;
                *c0 += &p * &free;
                let half = if t == 0 { BigInt::zero() } else { BigInt::one() << (t - 1) };
                *c1 += &p * (BigInt::from(hi_val.clone()) * &free + &half * (&free - 1));
                let low = low_rho_weighted(&self.digits.rho, t);
                *bsum += &p * (high * &free + low * &half);
            }
            1 => {
                let z0 = zeros_below[0];
                let term = &p << (z0 + t - 1);
                *c1 -= &term;
                let r = BigInt::from(self.digits.rho[z0 as usize]);
                *bsum -= r * (&p << (t - 1)) << z0;
            }
            _ => {}
        }
    }
}

fn low_rho_weighted(rho: &[i8], t: u64) -> BigInt {
    signed_bits(rho[..t as usize].iter().enumerate().map(|(j, &r)| (j as u64, r)))
}

/// Predicate `j ↦ (v ⊕ 2^j) < bound` in `O(1)` per `j` after one scan.
fn included_flips(v: &BigUint, bound: &BigUint, g: u64) -> impl Fn(u64) -> bool {
    let top = g.max(bound.bits());
    let diff = (0..top).rev().find(|&i| v.bit(i) != bound.bit(i));
    let v = v.clone();
    let bound = bound.clone();
    let low_less = diff.map(|h| {
        let mask = pow2(h) - 1u32;
        (&v & &mask) < (&bound & &mask)
    });
    let v_less = v < bound;
    move |j: u64| match diff {
        None => v.bit(j),
        Some(h) if j > h => bound.bit(j),
        Some(h) if j == h => low_less.unwrap_or(false),
        Some(_) => v_less,
    }
}

impl ScaledSums for DigitSums {
    fn count(&self, k: &BigUint) -> BigInt {
        self.sums(k).0
    }

    fn moment(&self, k: &BigUint) -> BigInt {
        self.sums(k).1
    }

    fn cumulative(&self, k: &BigUint) -> BigInt {
        let (c, mo) = self.sums(k);
        BigInt::from(k.clone()) * c - mo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct FrequencyEntry {
    mu: u64,
    v: u64,
    j: u32,
}

/// The sorted frequency list of one `P_{m,γ}`, for small `m`.
#[derive(Debug, Clone)]
pub struct FrequencyTable {
    bp: BlockPolynomial,
    entries: Vec<FrequencyEntry>,
}

impl FrequencyTable {
    pub const MAX_ENTRIES: u64 = 1 << 24;

    pub fn new(bp: &BlockPolynomial) -> Result<Self, BlockError> {
        if bp.m > 63 || bp.frequency_count() > BigUint::from(Self::MAX_ENTRIES) {
            return Err(BlockError::Budget { m: bp.m, limit: 63 });
        }
        let (m, g) = (bp.m, bp.gamma);
        let mut entries: Vec<FrequencyEntry> = (0..1u64 << g)
            .flat_map(|v| {
                (0..g as u32).map(move |j| FrequencyEntry {
                    mu: (v << (m - g)) + ((v ^ (1 << j)) << (m - 2 * g)),
                    v,
                    j,
                })
            })
            .collect();
        entries.sort_unstable_by_key(|e| e.mu);
        Ok(FrequencyTable { bp: *bp, entries })
    }

    pub fn block(&self) -> &BlockPolynomial {
        &self.bp
    }

    pub fn sums_at(&self, digits: &BlockDigits) -> TabulatedSums {
        let mut prefix_w = Vec::with_capacity(self.entries.len() + 1);
        let mut prefix_mw = Vec::with_capacity(self.entries.len() + 1);
        let (mut w_acc, mut mw_acc) = (0i64, 0i128);
        prefix_w.push(0);
        prefix_mw.push(0);
        for e in &self.entries {
            let mut c = digits.rho[e.j as usize];
            for (k, &dk) in digits.d.iter().enumerate() {
                if dk < 0 && (e.v >> k) & 1 == 1 {
                    c = -c;
                }
            }
            w_acc += i64::from(c);
            mw_acc += i128::from(c) * i128::from(e.mu);
            prefix_w.push(w_acc);
            prefix_mw.push(mw_acc);
        }
        TabulatedSums {
            mus: self.entries.iter().map(|e| e.mu).collect(),
            prefix_w,
            prefix_mw,
        }
    }
}

/// Prefix sums over the sorted frequency list at one point; `i128` exact.
#[derive(Debug, Clone)]
pub struct TabulatedSums {
    mus: Vec<u64>,
    prefix_w: Vec<i64>,
    prefix_mw: Vec<i128>,
}

impl TabulatedSums {
    fn rank(&self, k: u64) -> usize {
        self.mus.partition_point(|&mu| mu < k)
    }

    pub fn count_u64(&self, k: u64) -> i64 {
        self.prefix_w[self.rank(k)]
    }

    pub fn cumulative_i128(&self, k: u64) -> i128 {
        let r = self.rank(k);
        i128::from(k) * i128::from(self.prefix_w[r]) - self.prefix_mw[r]
    }

    pub fn window_sum_i128(&self, n: u64, lambda: u64) -> i128 {
        let top = self.cumulative_i128(n);
        if lambda >= n {
            top
        } else {
            top - self.cumulative_i128(n - lambda - 1)
        }
    }
}

fn saturating_u64(k: &BigUint) -> u64 {
    k.to_u64().unwrap_or(u64::MAX)
}

impl ScaledSums for TabulatedSums {
    fn count(&self, k: &BigUint) -> BigInt {
        BigInt::from(self.count_u64(saturating_u64(k)))
    }

    fn moment(&self, k: &BigUint) -> BigInt {
        BigInt::from(self.prefix_mw[self.rank(saturating_u64(k))])
    }
}

/// `√γ P_{m,γ}(x) = 2^γ 1_E(x) Σ_j ρ_j`.
pub fn eval_pointwise(bp: &BlockPolynomial, x: &DyadicPoint) -> ScaledValue {
    scaled_from_digits(bp, &BlockDigits::at(bp, x))
}

fn scaled_from_digits(bp: &BlockPolynomial, digits: &BlockDigits) -> ScaledValue {
    let q = if digits.in_e() {
        BigInt::from(digits.rho_sum()) << bp.gamma
    } else {
        BigInt::zero()
    };
    ScaledValue::new(q, bp.gamma)
}

fn check_dense(bp: &BlockPolynomial, max_m: u64) -> Result<u32, BlockError> {
    if bp.m > max_m || bp.m > 40 {
        return Err(BlockError::Budget {
            m: bp.m,
            limit: max_m.min(40),
        });
    }
    Ok(bp.m as u32)
}

/// `√γ P` at every cell of resolution `m`, from the factorized form.
pub fn dense_scaled(bp: &BlockPolynomial, max_m: u64) -> Result<Vec<i64>, BlockError> {
    let m = check_dense(bp, max_m)?;
    Ok((0..1u64 << m)
        .into_par_iter()
        .map(|cell| {
            let digits = BlockDigits::at_cell(bp, cell, m);
            if digits.in_e() {
                digits.rho_sum() << bp.gamma
            } else {
                0
            }
        })
        .collect())
}

/// `√γ P` at every cell, by synthesizing `Σ w_μ` with an inverse transform.
pub fn dense_synthesis(bp: &BlockPolynomial, max_m: u64) -> Result<Vec<i64>, BlockError> {
    let m = check_dense(bp, max_m)?;
    let mut coeffs = vec![0i64; 1 << m];
    for mu in bp.frequencies()? {
        coeffs[mu as usize] = 1;
    }
    // inverse: Hadamard butterflies on Paley-indexed data, then bit reversal
    hadamard_in_place_i64(&mut coeffs);
    bit_reverse_permute(&mut coeffs);
    Ok(coeffs)
}

/// `P_{m,γ}` as a grid function at resolution `m`.
pub fn build(bp: &BlockPolynomial, max_m: u64) -> Result<GridFunction<f64>, BlockError> {
    let scale = (bp.gamma as f64).sqrt();
    let values = dense_scaled(bp, max_m)?
        .into_iter()
        .map(|q| q as f64 / scale)
        .collect();
    Ok(GridFunction::new(values).expect("power-of-two grid"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EllChoice {
    First,
    Second,
}

/// The construction behind `|S_{ℓ(x)}(P; x)| >= √γ/4`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EllWitness {
    pub x: DyadicPoint,
    pub m: u64,
    pub gamma: u64,
    /// The sign taken by at least half of the `ρ_j`; ties go to `+1`.
    pub sigma: i8,
    /// `J = {j : ρ_j = σ}`
    pub j_set: Vec<u64>,
    #[serde(with = "biguint_text")]
    pub v: BigUint,
    #[serde(with = "biguint_text")]
    pub ell1: BigUint,
    #[serde(with = "biguint_text")]
    pub ell2: BigUint,
    pub s_ell1: ScaledValue,
    pub s_ell2: ScaledValue,
    pub choice: EllChoice,
}

impl EllWitness {
    pub fn ell(&self) -> &BigUint {
        match self.choice {
            EllChoice::First => &self.ell1,
            EllChoice::Second => &self.ell2,
        }
    }

    pub fn s_ell(&self) -> &ScaledValue {
        match self.choice {
            EllChoice::First => &self.s_ell1,
            EllChoice::Second => &self.s_ell2,
        }
    }

    /// Re-checks every structural property of the witness.
    pub fn check(&self) -> Result<(), String> {
        let g = self.gamma;
        let n_j = self.j_set.len() as u64;
        if 2 * n_j < g {
            return Err(format!("#J = {n_j} < gamma/2"));
        }
        let v: BigUint = self.j_set.iter().fold(BigUint::zero(), |acc, &j| acc + pow2(j));
        if v != self.v || v.is_zero() {
            return Err("v differs from sum of 2^j over J".into());
        }
        let s = self.m - g;
        let b_exp = self.m - 2 * g;
        if self.ell1 != &v << s || self.ell2 != &self.ell1 + (&v << b_exp) {
            return Err("ell1 or ell2 has the wrong form".into());
        }
        if self.ell1 < pow2(s) || self.ell2 >= pow2(self.m) {
            return Err("ell1, ell2 outside [2^(m-gamma), 2^m)".into());
        }
        let diff = (&self.s_ell2.q - &self.s_ell1.q).abs();
        if diff != BigInt::from(n_j) {
            return Err(format!("|S(ell2) - S(ell1)| sqrt(gamma) = {diff}, expected #J = {n_j}"));
        }
        if !self.s_ell().meets_quarter() {
            return Err(format!("4|{}| < gamma", self.s_ell().q));
        }
        if self.choice == EllChoice::Second && self.s_ell1.meets_quarter() {
            return Err("ell2 chosen although ell1 qualifies".into());
        }
        Ok(())
    }
}

pub fn select_ell(bp: &BlockPolynomial, x: &DyadicPoint) -> Result<EllWitness, BlockError> {
    select_ell_with(bp, x, &DigitSums::new(bp, x))
}

pub fn select_ell_with(
    bp: &BlockPolynomial,
    x: &DyadicPoint,
    sums: &dyn ScaledSumsDyn,
) -> Result<EllWitness, BlockError> {
    let g = bp.gamma;
    let rho = sums.rho();
    let plus = rho.iter().filter(|&&r| r > 0).count() as u64;
    let sigma: i8 = if 2 * plus >= g { 1 } else { -1 };
    let j_set: Vec<u64> = (0..g).filter(|&j| rho[j as usize] == sigma).collect();
    let v: BigUint = j_set.iter().fold(BigUint::zero(), |acc, &j| acc + pow2(j));
    let ell1 = &v << (bp.m - g);
    let ell2 = &ell1 + (&v << bp.block_exp());
    let s_ell1 = ScaledValue::new(sums.count_dyn(&ell1), g);
    let s_ell2 = ScaledValue::new(sums.count_dyn(&ell2), g);
    let choice = if s_ell1.meets_quarter() {
        EllChoice::First
    } else if s_ell2.meets_quarter() {
        EllChoice::Second
    } else {
        return Err(BlockError::NoQualifyingEll { x: x.to_string() });
    };
    Ok(EllWitness {
        x: x.clone(),
        m: bp.m,
        gamma: g,
        sigma,
        j_set,
        v,
        ell1,
        ell2,
        s_ell1,
        s_ell2,
        choice,
    })
}

/// Object-safe access used by [`select_ell_with`].
pub trait ScaledSumsDyn {
    fn rho(&self) -> &[i8];
    fn count_dyn(&self, k: &BigUint) -> BigInt;
}

impl ScaledSumsDyn for DigitSums {
    fn rho(&self) -> &[i8] {
        &self.digits.rho
    }
    fn count_dyn(&self, k: &BigUint) -> BigInt {
        self.count(k)
    }
}

/// Tabulated sums together with the digits they were built from.
pub struct TabulatedAt<'a> {
    pub digits: &'a BlockDigits,
    pub sums: &'a TabulatedSums,
}

impl ScaledSumsDyn for TabulatedAt<'_> {
    fn rho(&self) -> &[i8] {
        &self.digits.rho
    }
    fn count_dyn(&self, k: &BigUint) -> BigInt {
        self.sums.count(k)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorollaryCheck {
    #[serde(with = "biguint_text")]
    pub ell: BigUint,
    #[serde(with = "biguint_text")]
    pub lambda: BigUint,
    #[serde(with = "biguint_text")]
    pub block_size: BigUint,
    /// `√γ V_ℓ` as an exact rational.
    pub v_scaled: String,
    pub s_scaled: ScaledValue,
    pub holds: bool,
}

/// `V_ℓ(P; x) = S_ℓ(P; x)` whenever `λ_ℓ < 2^{m-2γ}`.
pub fn corollary22_check(
    bp: &BlockPolynomial,
    window: &WindowSequence,
    x: &DyadicPoint,
) -> Result<CorollaryCheck, BlockError> {
    let sums = DigitSums::new(bp, x);
    let witness = select_ell_with(bp, x, &sums)?;
    let lambda = window.at(witness.ell())?;
    corollary22_check_with(bp, &witness, &lambda, &sums)
}

pub fn corollary22_check_with(
    bp: &BlockPolynomial,
    witness: &EllWitness,
    lambda: &BigUint,
    sums: &impl ScaledSums,
) -> Result<CorollaryCheck, BlockError> {
    let block = bp.block_size();
    if *lambda >= block {
        return Err(BlockError::WindowTooWide {
            lambda: lambda.to_string(),
            block: block.to_string(),
        });
    }
    let ell = witness.ell();
    let total = sums.window_sum(ell, lambda);
    let terms = BigInt::from(lambda + 1u32);
    let s = witness.s_ell();
    let holds = total == &terms * &s.q;
    Ok(CorollaryCheck {
        ell: ell.clone(),
        lambda: lambda.clone(),
        block_size: block,
        v_scaled: rational_text(&BigRational::new(total, terms)),
        s_scaled: s.clone(),
        holds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormCheck {
    /// `Σ_{ε ∈ {±1}^γ} |Σ_j ε_j|`
    pub sign_vector_sum: String,
    /// `√γ ‖P‖_1` as an exact rational
    pub scaled_norm: String,
    pub norm_f64: f64,
    pub grid_agrees: bool,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupCheck {
    /// `max √γ |P|` over the grid
    pub max_scaled: String,
    /// `γ 2^γ`
    pub bound_scaled: String,
    pub attained: bool,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectrumCheck {
    pub size: u64,
    pub expected_size: String,
    pub min: u64,
    pub max: u64,
    pub on_lattice: bool,
    pub in_range: bool,
    pub matches_frequencies: bool,
    pub unit_coefficients: bool,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EllCheck {
    pub points: u64,
    pub passed: u64,
    /// `min (4|q_ℓ| - γ)` over the grid
    pub min_margin: String,
    pub first_choice: u64,
    pub second_choice: u64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop21Certificate {
    pub m: u64,
    pub gamma: u64,
    pub block_size: String,
    pub l1: NormCheck,
    pub sup: SupCheck,
    pub spectrum: SpectrumCheck,
    pub ell: EllCheck,
    pub e_measure: String,
    pub e_cells: u64,
    pub synthesis_agrees: bool,
    pub holds: bool,
}

fn binomial_row(g: u64) -> Vec<BigUint> {
    let mut row = vec![BigUint::one()];
    for i in 0..g {
        let next = &row[i as usize] * (g - i) / (i + 1);
        row.push(next);
    }
    row
}

/// `Σ_{ε ∈ {±1}^γ} |Σ ε_j| = Σ_i C(γ, i) |γ - 2i|`.
pub fn sign_vector_sum(g: u64) -> BigUint {
    binomial_row(g)
        .into_iter()
        .enumerate()
        .map(|(i, c)| c * (2 * i as u64).abs_diff(g))
        .sum()
}

fn fail(assertion: &'static str, x: impl ToString, detail: String) -> BlockError {
    BlockError::Verification {
        assertion,
        x: x.to_string(),
        detail,
    }
}

/// Exhaustive check of the four properties at every cell of resolution `m`.
pub fn verify_prop21(bp: &BlockPolynomial, max_m: u64) -> Result<Prop21Certificate, BlockError> {
    let m = check_dense(bp, max_m)?;
    let g = bp.gamma;
    let dense = dense_scaled(bp, max_m)?;
    let synth = dense_synthesis(bp, max_m)?;
    let synthesis_agrees = dense == synth;
    if let Some(i) = (0..dense.len()).find(|&i| dense[i] != synth[i]) {
        return Err(fail(
            "synthesis",
            DyadicPoint::cell(i as u64, m),
            format!("factorized {} vs synthesized {}", dense[i], synth[i]),
        ));
    }

    // (i) by sign vectors, cross-checked against the grid
    let svs = sign_vector_sum(g);
    let scaled_norm = BigRational::new(BigInt::from(svs.clone()), BigInt::from(pow2(g)));
    let grid_sum: i64 = dense.iter().map(|q| q.abs()).sum();
    let grid_norm = BigRational::new(BigInt::from(grid_sum), BigInt::from(pow2(u64::from(m))));
    let grid_agrees = grid_norm == scaled_norm;
    let l1_holds = &scaled_norm * &scaled_norm <= BigRational::from_integer(BigInt::from(g));
    if !grid_agrees || !l1_holds {
        return Err(fail(
            "(i)",
            "all",
            format!("sqrt(gamma)|P|_1 = {} (grid {})", rational_text(&scaled_norm), rational_text(&grid_norm)),
        ));
    }
    let l1 = NormCheck {
        sign_vector_sum: svs.to_string(),
        scaled_norm: rational_text(&scaled_norm),
        norm_f64: scaled_norm.to_f64().unwrap_or(f64::NAN) / (g as f64).sqrt(),
        grid_agrees,
        holds: l1_holds,
    };

    // (ii)
    let bound = bp.sup_bound_scaled();
    let max_q = dense.iter().map(|q| q.abs()).max().unwrap_or(0);
    if BigInt::from(max_q) > bound {
        let i = dense.iter().position(|q| q.abs() == max_q).unwrap_or(0);
        return Err(fail("(ii)", DyadicPoint::cell(i as u64, m), format!("{max_q} > {bound}")));
    }
    let sup = SupCheck {
        max_scaled: max_q.to_string(),
        bound_scaled: bound.to_string(),
        attained: BigInt::from(max_q) == bound,
        holds: true,
    };

    // (iii) from the integer transform of the grid values
    let mut coeffs = dense.clone();
    bit_reverse_permute(&mut coeffs);
    hadamard_in_place_i64(&mut coeffs);
    let unit = 1i64 << m;
    let spec: Vec<u64> = (0..coeffs.len() as u64).filter(|&k| coeffs[k as usize] != 0).collect();
    let unit_coefficients = spec.iter().all(|&k| coeffs[k as usize] == unit);
    let block = 1u64 << bp.block_exp();
    let on_lattice = spec.iter().all(|k| k % block == 0);
    let in_range = spec.iter().all(|&k| k >= block && k < unit as u64);
    let matches_frequencies = spec == bp.frequencies()?;
    let spectrum = SpectrumCheck {
        size: spec.len() as u64,
        expected_size: bp.frequency_count().to_string(),
        min: spec.first().copied().unwrap_or(0),
        max: spec.last().copied().unwrap_or(0),
        on_lattice,
        in_range,
        matches_frequencies,
        unit_coefficients,
        holds: on_lattice && in_range && matches_frequencies && unit_coefficients,
    };
    if !spectrum.holds {
        return Err(fail("(iii)", "all", format!("{spectrum:?}")));
    }

    // (iv) at every cell
    let table = FrequencyTable::new(bp).ok();
    let results: Vec<Result<(i64, EllChoice), BlockError>> = (0..1u64 << m)
        .into_par_iter()
        .map(|cell| {
            let x = DyadicPoint::cell(cell, m);
            let digits = BlockDigits::at_cell(bp, cell, m);
            let w = match &table {
                Some(t) => {
                    let sums = t.sums_at(&digits);
                    select_ell_with(bp, &x, &TabulatedAt { digits: &digits, sums: &sums })?
                }
                None => select_ell_with(bp, &x, &DigitSums::from_digits(bp, digits))?,
            };
            w.check().map_err(|d| fail("(iv)", &x, d))?;
            let margin = 4 * w.s_ell().q.to_i64().unwrap_or(i64::MAX).abs() - g as i64;
            Ok((margin, w.choice))
        })
        .collect();
    let mut min_margin = i64::MAX;
    let (mut first, mut second) = (0, 0);
    for r in results {
        let (margin, choice) = r?;
        min_margin = min_margin.min(margin);
        match choice {
            EllChoice::First => first += 1,
            EllChoice::Second => second += 1,
        }
    }
    let points = 1u64 << m;
    let e_cells = dense_e_cells(bp, m);
    Ok(Prop21Certificate {
        m: bp.m,
        gamma: g,
        block_size: block.to_string(),
        l1,
        sup,
        spectrum,
        ell: EllCheck {
            points,
            passed: first + second,
            min_margin: min_margin.to_string(),
            first_choice: first,
            second_choice: second,
            holds: first + second == points,
        },
        e_measure: rational_text(&BigRational::new(BigInt::from(e_cells), BigInt::from(points))),
        e_cells,
        synthesis_agrees,
        holds: true,
    })
}

fn dense_e_cells(bp: &BlockPolynomial, m: u32) -> u64 {
    (0..1u64 << m)
        .into_par_iter()
        .filter(|&cell| BlockDigits::at_cell(bp, cell, m).in_e())
        .count() as u64
}

/// Exact `V_ℓ = S_ℓ` for the constant window `λ ≡ c` at every cell, for each
/// `c` in `windows`. Returns the number of `(x, c)` pairs checked.
pub fn corollary_replay(bp: &BlockPolynomial, windows: &[u64]) -> Result<u64, BlockError> {
    let m = check_dense(bp, 30)?;
    let table = FrequencyTable::new(bp)?;
    let block = 1u64 << bp.block_exp();
    if let Some(&c) = windows.iter().find(|&&c| c >= block) {
        return Err(BlockError::WindowTooWide {
            lambda: c.to_string(),
            block: block.to_string(),
        });
    }
    (0..1u64 << m)
        .into_par_iter()
        .map(|cell| {
            let x = DyadicPoint::cell(cell, m);
            let digits = BlockDigits::at_cell(bp, cell, m);
            let sums = table.sums_at(&digits);
            let w = select_ell_with(bp, &x, &TabulatedAt { digits: &digits, sums: &sums })?;
            let ell = w.ell().to_u64().expect("m <= 30");
            let s = i128::from(sums.count_u64(ell));
            for &c in windows {
                let lambda = c.min(ell);
                if sums.window_sum_i128(ell, lambda) != i128::from(lambda + 1) * s {
                    return Err(fail("corollary", &x, format!("lambda = {c}")));
                }
            }
            Ok(windows.len() as u64)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))
}
