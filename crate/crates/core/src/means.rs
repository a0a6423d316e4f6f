//! de la Vallée Poussin means `V_n = (λ_n+1)^{-1} Σ_{k=n-λ_n}^{n} S_k` and
//! the maximal operators built from them.
//!
//! Bulk routines work one grid cell at a time: one incremental pass gives
//! `S_0..S_{n_max}` at the cell, a running prefix sum turns every window
//! average into a single subtraction.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::DyadicPoint;
use crate::error::{MeansError, WalshError};
use crate::scalar::{NumberMode, Scalar, FLOAT_AGG_TOL};
use crate::walsh::{forward_fwht, GridFunction, SpectrumVector};
use crate::window::WindowSequence;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VpMeanResult<T> {
    pub n: u64,
    pub lambda: u64,
    pub value: T,
    /// `n` exceeded `2^M`, so the top of the window used `S_k = f`.
    pub clamped: bool,
}

pub fn vp_mean<T: Scalar>(
    f: &GridFunction<T>,
    window: &WindowSequence,
    n: u64,
    x: &DyadicPoint,
) -> Result<VpMeanResult<T>, MeansError> {
    vp_mean_spectral(&forward_fwht(f), window, n, x)
}

/// Same as [`vp_mean`] for a function given by its coefficients.
pub fn vp_mean_spectral<T: Scalar>(
    spec: &SpectrumVector<T>,
    window: &WindowSequence,
    n: u64,
    x: &DyadicPoint,
) -> Result<VpMeanResult<T>, MeansError> {
    let lambdas = window.prefix(n)?;
    let lambda = lambdas[n as usize];
    let column = spec.partial_sum_column(x.cell_index(spec.resolution()), n);
    let mut acc = T::zero();
    for s in &column[(n - lambda) as usize..] {
        acc.add_assign(s);
    }
    Ok(VpMeanResult {
        n,
        lambda,
        value: acc.div_u64(lambda + 1),
        clamped: n > 1u64 << spec.resolution(),
    })
}

/// `V_1..V_{n_max}` at one cell, given `λ_0..λ_{n_max}`.
fn cell_means<T: Scalar>(spec: &SpectrumVector<T>, cell: u64, lambdas: &[u64]) -> Vec<T> {
    let n_max = lambdas.len() as u64 - 1;
    let column = spec.partial_sum_column(cell, n_max);
    // prefix[k] = S_0 + … + S_{k-1}
    let mut prefix = Vec::with_capacity(column.len() + 1);
    let mut acc = T::zero();
    prefix.push(acc.clone());
    for s in &column {
        acc.add_assign(s);
        prefix.push(acc.clone());
    }
    (1..=n_max)
        .map(|n| {
            let lambda = lambdas[n as usize];
            let lo = (n - lambda) as usize;
            prefix[n as usize + 1].sub(&prefix[lo]).div_u64(lambda + 1)
        })
        .collect()
}

fn cell_cesaro_max<T: Scalar>(spec: &SpectrumVector<T>, cell: u64, n_max: u64) -> T {
    let column = spec.partial_sum_column(cell, n_max);
    let mut acc = T::zero();
    let mut best = T::zero();
    for (n, s) in column.iter().enumerate().skip(1) {
        acc.add_assign(&s.abs());
        let avg = acc.div_u64(n as u64);
        if avg > best {
            best = avg;
        }
    }
    best
}

fn max_abs<T: Scalar>(values: &[T]) -> T {
    values.iter().fold(T::zero(), |best, v| {
        let a = v.abs();
        if a > best {
            a
        } else {
            best
        }
    })
}

/// `V[n][i]` for `1 <= n <= n_max` at every cell `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct VpCurve<T> {
    pub resolution: u32,
    pub n_max: u64,
    pub lambdas: Vec<u64>,
    rows: Vec<Vec<T>>,
}

impl<T: Scalar> VpCurve<T> {
    /// Row `n`, `1 <= n <= n_max`.
    pub fn row(&self, n: u64) -> &[T] {
        &self.rows[n as usize - 1]
    }

    pub fn rows(&self) -> impl Iterator<Item = (u64, &[T])> {
        self.rows.iter().enumerate().map(|(i, r)| (i as u64 + 1, r.as_slice()))
    }
}

/// The curve holds `n_max · 2^M` values; it is allowed while that stays
/// below `4^max_resolution`.
pub fn vp_mean_curve<T: Scalar>(
    f: &GridFunction<T>,
    window: &WindowSequence,
    n_max: u64,
    max_resolution: u32,
) -> Result<VpCurve<T>, MeansError> {
    let m = f.resolution();
    let cells = 1u64 << m;
    if m > max_resolution || n_max.saturating_mul(cells) > 1u64 << (2 * max_resolution) {
        return Err(WalshError::Budget {
            requested: m.max((64 - n_max.leading_zeros()).saturating_sub(1)),
            limit: max_resolution,
        }
        .into());
    }
    let lambdas = window.prefix(n_max)?;
    let spec = forward_fwht(f);
    let columns: Vec<Vec<T>> = (0..cells)
        .into_par_iter()
        .map(|cell| cell_means(&spec, cell, &lambdas))
        .collect();
    let rows = (0..n_max as usize)
        .map(|n| columns.iter().map(|c| c[n].clone()).collect())
        .collect();
    Ok(VpCurve {
        resolution: m,
        n_max,
        lambdas,
        rows,
    })
}

/// `σ*f(x) = max_{1<=n<=n_max} n^{-1} Σ_{k=1}^{n} |S_k(f; x)|`.
pub fn sigma_star<T: Scalar>(f: &GridFunction<T>, n_max: u64) -> GridFunction<T> {
    let spec = forward_fwht(f);
    let values = (0..1u64 << f.resolution())
        .into_par_iter()
        .map(|cell| cell_cesaro_max(&spec, cell, n_max))
        .collect();
    GridFunction::new(values).expect("power-of-two grid")
}

/// `M_λ f(x) = max_{1<=n<=n_max} |V_n(f; x)|`.
pub fn maximal_vp<T: Scalar>(
    f: &GridFunction<T>,
    window: &WindowSequence,
    n_max: u64,
) -> Result<GridFunction<T>, MeansError> {
    let lambdas = window.prefix(n_max)?;
    let spec = forward_fwht(f);
    let values = (0..1u64 << f.resolution())
        .into_par_iter()
        .map(|cell| max_abs(&cell_means(&spec, cell, &lambdas)))
        .collect();
    Ok(GridFunction::new(values)?)
}

/// `‖V_n f - f‖_∞` for `1 <= n <= n_max`.
pub fn convergence_errors<T: Scalar>(
    f: &GridFunction<T>,
    window: &WindowSequence,
    n_max: u64,
) -> Result<Vec<(u64, T)>, MeansError> {
    if n_max == 0 {
        return Ok(Vec::new());
    }
    let lambdas = window.prefix(n_max)?;
    let spec = forward_fwht(f);
    let worst = (0..1u64 << f.resolution())
        .into_par_iter()
        .map(|cell| {
            let fx = &f.values()[cell as usize];
            cell_means(&spec, cell, &lambdas)
                .into_iter()
                .map(|v| v.sub(fx).abs())
                .collect::<Vec<T>>()
        })
        .reduce(
            || vec![T::zero(); n_max as usize],
            |a, b| {
                a.into_iter()
                    .zip(b)
                    .map(|(x, y)| if y > x { y } else { x })
                    .collect()
            },
        );
    Ok((1..=n_max).zip(worst).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakTypePoint {
    pub t: f64,
    /// `t · |{g > t}|`
    pub value: f64,
}

pub fn weak_type_profile(g: &GridFunction<f64>, thresholds: &[f64]) -> Vec<WeakTypePoint> {
    let cells = g.len() as f64;
    thresholds
        .iter()
        .map(|&t| {
            let count = g.values().iter().filter(|&&v| v > t).count();
            WeakTypePoint {
                t,
                value: t * count as f64 / cells,
            }
        })
        .collect()
}

/// `sup_t t·|{g > t}|`. The supremum is approached as `t` rises to one of
/// the values `v` of `g`, where it equals `v·|{g >= v}|`.
pub fn weak_type_sup(g: &GridFunction<f64>) -> WeakTypePoint {
    let mut sorted = g.values().to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let cells = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| WeakTypePoint {
            t: v,
            value: v * (i + 1) as f64 / cells,
        })
        .fold(WeakTypePoint { t: 0.0, value: 0.0 }, |best, p| {
            if p.value > best.value {
                p
            } else {
                best
            }
        })
}

/// Pointwise check of `M_λ f <= C σ*f + Σ_{n<n_0} |V_n f|` over
/// `1 <= n <= n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    /// Smallest `n_0` with `λ_n >= θ n` for every `n_0 <= n <= n_max`.
    pub n0: u64,
    /// `1/θ + 1`, the constant used in the check.
    pub constant: String,
    /// `max_{n_0<=n<=n_max} n/(λ_n+1)`, the smallest constant the argument
    /// needs on the probed range.
    pub tight_constant: String,
    pub holds: bool,
    /// Largest `M_λ f - (C σ*f + head)` over the cells, as a float.
    pub worst_excess: f64,
    pub worst_cell: u64,
}

pub fn domination_check<T: Scalar>(
    f: &GridFunction<T>,
    window: &WindowSequence,
    theta: &BigRational,
    n_max: u64,
) -> Result<DominationReport, MeansError> {
    let lambdas = window.prefix(n_max)?;
    let mut n0 = n_max + 1;
    for n in (1..=n_max).rev() {
        let lhs = BigRational::from_integer(BigInt::from(lambdas[n as usize]));
        if lhs < theta * BigRational::from_integer(BigInt::from(n)) {
            break;
        }
        n0 = n;
    }
    let constant = theta.recip() + BigRational::from_integer(1.into());
    let tight = (n0..=n_max)
        .map(|n| BigRational::new(n.into(), (lambdas[n as usize] + 1).into()))
        .max()
        .unwrap_or_else(<BigRational as Zero>::zero);
    let c = T::from_rational(&constant);
    let spec = forward_fwht(f);
    let excess: Vec<(T, T)> = (0..1u64 << f.resolution())
        .into_par_iter()
        .map(|cell| {
            let means = cell_means(&spec, cell, &lambdas);
            let maximal = max_abs(&means);
            let mut head = T::zero();
            for v in &means[..(n0 - 1).min(n_max) as usize] {
                head.add_assign(&v.abs());
            }
            let rhs = c.mul(&cell_cesaro_max(&spec, cell, n_max)).add(&head);
            (maximal.sub(&rhs), rhs)
        })
        .collect();
    let holds = excess.iter().all(|(e, rhs)| match T::MODE {
        NumberMode::Exact => !(*e > T::zero()),
        NumberMode::Floating => e.to_f64() <= FLOAT_AGG_TOL * rhs.to_f64().abs().max(1.0),
    });
    let (worst_cell, worst) = excess
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .0.to_f64().total_cmp(&b.1 .0.to_f64()))
        .map(|(i, (e, _))| (i as u64, e.to_f64()))
        .unwrap_or((0, 0.0));
    Ok(DominationReport {
        n0,
        constant: crate::scalar::rational_text(&constant),
        tight_constant: crate::scalar::rational_text(&tight),
        holds,
        worst_excess: worst,
        worst_cell,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_grid, random_rational_grid, random_walsh_polynomial};
    use crate::walsh::partial_sum;

    fn rat(p: i64, q: i64) -> BigRational {
        BigRational::new(p.into(), q.into())
    }

    /// Direct summation of `S_k` computed one at a time.
    fn vp_oracle(f: &GridFunction<f64>, lambda: u64, n: u64, cell: u64) -> f64 {
        let x = DyadicPoint::cell(cell, f.resolution());
        let mut acc = 0.0;
        for k in n - lambda..=n {
            acc += partial_sum(f, k, &x).value;
        }
        acc / (lambda + 1) as f64
    }

    #[test]
    fn constant_one_full_window() {
        let f = GridFunction::constant(3, rat(1, 1));
        let w = WindowSequence::proportional(rat(1, 1)).unwrap();
        for cell in 0..8 {
            let r = vp_mean(&f, &w, 2, &DyadicPoint::cell(cell, 3)).unwrap();
            assert_eq!(r.value, rat(2, 3));
            assert_eq!(r.lambda, 2);
        }
    }

    #[test]
    fn polynomial_window_past_degree_reproduces_f() {
        let f: GridFunction<BigRational> = random_walsh_polynomial(5, 4, 3);
        let w = WindowSequence::constant(3).unwrap();
        for n in 8..=16 {
            for cell in 0..16 {
                let x = DyadicPoint::cell(cell, 4);
                assert_eq!(&vp_mean(&f, &w, n, &x).unwrap().value, f.at(&x));
            }
        }
    }

    #[test]
    fn curve_matches_oracle_exhaustively() {
        let f = random_grid(5, 11);
        let w = WindowSequence::root(rat(1, 2)).unwrap();
        let curve = vp_mean_curve(&f, &w, 32, 12).unwrap();
        for (n, row) in curve.rows() {
            for (cell, v) in row.iter().enumerate() {
                let lam = w.at_u64(n).unwrap();
                let want = vp_oracle(&f, lam, n, cell as u64);
                assert!((v - want).abs() < 1e-12, "n = {n}, cell = {cell}");
            }
        }
    }

    #[test]
    fn curve_exact_equals_vp_mean() {
        let f = random_rational_grid(3, 2);
        let w = WindowSequence::log_ratio();
        let curve = vp_mean_curve(&f, &w, 12, 12).unwrap();
        for n in 1..=12 {
            for cell in 0..8u64 {
                let r = vp_mean(&f, &w, n, &DyadicPoint::cell(cell, 3)).unwrap();
                assert_eq!(curve.row(n)[cell as usize], r.value);
            }
        }
        assert!(vp_mean(&f, &w, 12, &DyadicPoint::zero()).unwrap().clamped);
    }

    #[test]
    fn curve_budget() {
        let f = random_grid(6, 1);
        let w = WindowSequence::constant(1).unwrap();
        assert!(vp_mean_curve(&f, &w, 64, 5).is_err());
        let zero = GridFunction::constant(4, 0.0);
        let c = vp_mean_curve(&zero, &w, 16, 12).unwrap();
        assert!(c.rows().all(|(_, r)| r.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn sigma_star_of_w0_is_one() {
        let f = GridFunction::constant(4, rat(1, 1));
        let s = sigma_star(&f, 16);
        assert!(s.values().iter().all(|v| *v == rat(1, 1)));
    }

    #[test]
    fn sigma_star_matches_triple_loop() {
        let f = random_grid(5, 4);
        let s = sigma_star(&f, 32);
        for cell in 0..32 {
            let x = DyadicPoint::cell(cell, 5);
            let mut best = 0.0f64;
            for n in 1..=32 {
                let mut acc = 0.0;
                for k in 1..=n {
                    acc += partial_sum(&f, k, &x).value.abs();
                }
                best = best.max(acc / n as f64);
            }
            assert!((s.values()[cell as usize] - best).abs() < 1e-12);
        }
    }

    #[test]
    fn maximal_of_w0_full_window() {
        let f = GridFunction::constant(3, rat(1, 1));
        let w = WindowSequence::proportional(rat(1, 1)).unwrap();
        let m = maximal_vp(&f, &w, 8).unwrap();
        assert!(m.values().iter().all(|v| *v == rat(8, 9)));
    }

    #[test]
    fn weak_type_basics() {
        let g = GridFunction::constant(3, 1.0);
        let p = weak_type_profile(&g, &[2.0, 0.5]);
        assert_eq!(p[0].value, 0.0);
        assert_eq!(p[1].value, 0.5);
        let g = GridFunction::new(vec![4.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(weak_type_sup(&g), WeakTypePoint { t: 4.0, value: 1.0 });
    }

    #[test]
    fn domination_proportional() {
        let f = random_grid(6, 9);
        let w = WindowSequence::proportional(rat(1, 2)).unwrap();
        let r = domination_check(&f, &w, &rat(1, 2), 64).unwrap();
        assert!(r.holds, "{r:?}");
        assert_eq!(r.n0, 1);
        assert_eq!(r.constant, "3");
    }

    #[test]
    fn convergence_errors_vanish_past_degree() {
        let f: GridFunction<BigRational> = random_walsh_polynomial(8, 5, 1);
        let w = WindowSequence::proportional(rat(1, 2)).unwrap();
        let errs = convergence_errors(&f, &w, 40).unwrap();
        for (n, e) in errs {
            if n - (n + 1) / 2 >= 8 {
                assert!(Zero::is_zero(&e), "n = {n}");
            }
        }
        assert!(convergence_errors(&f, &w, 0).unwrap().is_empty());
    }
}
