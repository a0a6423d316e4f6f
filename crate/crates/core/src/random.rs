//! Seeded generators. ChaCha8 keeps streams identical across platforms.

use num_bigint::{BigInt, RandBigInt};
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dyadic::DyadicPoint;
use crate::scalar::Scalar;
use crate::walsh::{inverse_fwht, GridFunction, SpectrumVector};

/// Seed used when a caller does not supply one.
pub const DEFAULT_SEED: u64 = 0x5EED_0F_D1AD;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Values uniform in `[-1, 1)` on a grid of resolution `resolution`.
pub fn random_grid(resolution: u32, seed: u64) -> GridFunction<f64> {
    let mut r = rng(seed);
    let values = (0..1u64 << resolution)
        .map(|_| r.gen_range(-1.0..1.0))
        .collect();
    GridFunction::new(values).expect("power-of-two length")
}

/// A random grid function normalised to `‖f‖₁ = 1`.
pub fn random_unit_l1(resolution: u32, seed: u64) -> GridFunction<f64> {
    let f = random_grid(resolution, seed);
    let norm = f.l1_norm();
    GridFunction::new(f.values().iter().map(|v| v / norm).collect()).expect("same length")
}

/// A Walsh polynomial of degree `< degree` sampled at resolution
/// `resolution`, with dyadic-rational coefficients `p / 2^10`, `|p| <= 1000`.
pub fn random_walsh_polynomial<T: Scalar>(degree: u64, resolution: u32, seed: u64) -> GridFunction<T> {
    assert!(degree <= 1 << resolution);
    let mut r = rng(seed);
    let coeffs = (0..1u64 << resolution)
        .map(|k| {
            if k < degree {
                T::from_i64(r.gen_range(-1000..=1000)).div_pow2(10)
            } else {
                T::zero()
            }
        })
        .collect();
    inverse_fwht(&SpectrumVector::new(coeffs).expect("power-of-two length"))
}

/// Exact random rationals with small denominators, for exact-mode tests.
pub fn random_rational_grid(resolution: u32, seed: u64) -> GridFunction<BigRational> {
    let mut r = rng(seed);
    let values = (0..1u64 << resolution)
        .map(|_| {
            let p: i64 = r.gen_range(-500..=500);
            let q: i64 = r.gen_range(1..=12);
            BigRational::new(BigInt::from(p), BigInt::from(q))
        })
        .collect();
    GridFunction::new(values).expect("power-of-two length")
}

/// `count` pseudo-random points at resolution `resolution`.
pub fn random_points(count: usize, resolution: u64, seed: u64) -> Vec<DyadicPoint> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| {
            let k = r.gen_biguint(resolution);
            DyadicPoint::new(k, resolution).expect("k < 2^resolution")
        })
        .collect()
}
