//! `∫ ω(|f_A|)` against `Σ_a δ_a ω(4^{γ_a})/4^{γ_a} <= Σ_a 4^{-a}`.
//!
//! The levels read disjoint digit blocks, so `W_1, …, W_A` are independent
//! under Lebesgue measure and the integral is a finite sum over the joint
//! value distribution.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::f64::consts::LN_2;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::plan::{rational_serde, DivergencePlan, LevelPlan};
use crate::block::{dense_scaled, BlockPolynomial};
use crate::dyadic::pow2;
use crate::error::PlanError;
use crate::orlicz::{OrliczFamily, OrliczFunction};
use crate::scalar::rational_text;
use crate::surd::{big_ratio_f64, SurdSum};

/// Joint distributions with more atoms than this are refused.
pub const MAX_ATOMS: u64 = 1 << 22;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MembershipTerm {
    pub a: u64,
    #[serde(with = "rational_serde")]
    pub delta: BigRational,
    /// Upper bound on `ω(4^γ)/4^γ`.
    #[serde(with = "rational_serde")]
    pub ratio: BigRational,
    pub ratio_exact: bool,
    #[serde(with = "rational_serde")]
    pub term: BigRational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MembershipBound {
    pub levels: usize,
    pub terms: Vec<MembershipTerm>,
    /// `Σ_a δ_a ω(4^{γ_a})/4^{γ_a}`
    #[serde(with = "rational_serde")]
    pub bound: BigRational,
    /// `Σ_a 4^{-a}`
    #[serde(with = "rational_serde")]
    pub majorant: BigRational,
    pub bound_le_majorant: bool,
    pub majorant_below_third: bool,
}

pub fn orlicz_membership_bound(plan: &DivergencePlan, levels: usize) -> Result<MembershipBound, PlanError> {
    let lv = plan.truncated(levels)?;
    let terms: Vec<MembershipTerm> = lv
        .iter()
        .map(|l| {
            let (ratio, ratio_exact) = plan.omega.ratio_upper_at_pow2(2 * l.gamma);
            MembershipTerm {
                a: l.a,
                delta: l.delta.value.clone(),
                term: &l.delta.value * &ratio,
                ratio,
                ratio_exact,
            }
        })
        .collect();
    let bound = terms.iter().fold(BigRational::zero(), |acc, t| acc + &t.term);
    let majorant = (1..=levels as u64).fold(BigRational::zero(), |acc, a| {
        acc + BigRational::new(BigInt::one(), BigInt::from(pow2(2 * a)))
    });
    Ok(MembershipBound {
        levels,
        terms,
        bound_le_majorant: bound <= majorant,
        majorant_below_third: majorant < BigRational::new(1.into(), 3.into()),
        bound,
        majorant,
    })
}

/// `Σ_a δ_a W_a(x)` for per-level scaled values `q_a` (`W_a = q_a/√γ_a`).
fn combine(levels: &[LevelPlan], qs: &[BigInt]) -> SurdSum {
    let mut out = SurdSum::zero();
    for (l, q) in levels.iter().zip(qs) {
        out.add_assign(&SurdSum::over_sqrt(&l.delta.value * q, l.gamma));
    }
    out
}

/// Atoms `(q, count)` of `√γ P_{m,γ}` over the denominator `4^γ`: `0` off
/// `E`, and `2^γ (γ - 2i)` with count `C(γ, i)`.
fn level_atoms(gamma: u64) -> Vec<(BigInt, BigInt)> {
    let scale = BigInt::from(pow2(gamma));
    let mut atoms: BTreeMap<BigInt, BigInt> = BTreeMap::new();
    let mut binom = BigInt::one();
    for i in 0..=gamma {
        let q = &scale * (BigInt::from(gamma) - BigInt::from(2 * i));
        *atoms.entry(q).or_default() += &binom;
        binom = binom * BigInt::from(gamma - i) / BigInt::from(i + 1);
    }
    // off E: 4^γ - 2^γ
    *atoms.entry(BigInt::zero()).or_default() += BigInt::from(pow2(2 * gamma)) - &scale;
    atoms.into_iter().collect()
}

/// Integral of `ω(|v|)` for a weighted list of values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipIntegral {
    pub method: String,
    pub atoms: u64,
    /// Exact value, present when `ω` is the identity.
    pub exact: Option<String>,
    pub value_f64: f64,
    pub le_bound: bool,
}

/// `ln |Σ_a δ_a q_a/√γ_a|` without leaving the `f64` range, or `None`
/// when the sum vanishes.
fn ln_abs_value(levels: &[LevelPlan], qs: &[BigInt]) -> Option<f64> {
    let top = levels
        .iter()
        .zip(qs)
        .filter(|(_, q)| !q.is_zero())
        .map(|(_, q)| q.bits())
        .max()?;
    let v: f64 = levels
        .iter()
        .zip(qs)
        .map(|(l, q)| {
            // q / 2^top from its leading 64 bits
            let shift = q.bits().saturating_sub(64);
            let lead = (q >> shift).to_f64().unwrap_or(0.0) * 2f64.powi(shift as i32 - top as i32);
            big_ratio_f64(&l.delta.value) * lead / (l.gamma as f64).sqrt()
        })
        .sum();
    (v != 0.0).then(|| top as f64 * LN_2 + v.abs().ln())
}

/// `ln n` for `n > 0`.
fn ln_big(n: &BigInt) -> f64 {
    let shift = n.bits().saturating_sub(64);
    (n >> shift).to_f64().unwrap_or(f64::NAN).ln() + shift as f64 * LN_2
}

fn integrate(
    omega: &OrliczFunction,
    levels: &[LevelPlan],
    weighted: impl Iterator<Item = (Vec<BigInt>, BigInt)>,
    log2_denom: u64,
    bound: &BigRational,
    method: &str,
) -> MembershipIntegral {
    let denom = BigInt::from(pow2(log2_denom));
    let identity = matches!(omega.family(), OrliczFamily::Identity);
    let mut exact = SurdSum::zero();
    let mut approx = 0.0;
    let mut atoms = 0u64;
    for (qs, count) in weighted {
        atoms += 1;
        if identity {
            let p = BigRational::new(count, denom.clone());
            exact.add_assign(&combine(levels, &qs).abs().scale(&p));
        } else if let Some(ln_v) = ln_abs_value(levels, &qs) {
            approx += (omega.ln_eval(ln_v) + ln_big(&count) - log2_denom as f64 * LN_2).exp();
        }
    }
    if identity {
        approx = exact.to_f64();
    }
    let le_bound = if identity {
        exact.cmp_exact(&SurdSum::rational(bound.clone())) != Ordering::Greater
    } else {
        approx <= big_ratio_f64(bound) * (1.0 + 1e-12)
    };
    MembershipIntegral {
        method: method.into(),
        atoms,
        exact: identity.then(|| exact.to_string()),
        value_f64: approx,
        le_bound,
    }
}

/// `∫ ω(|f_A|)` from the product of the per-level distributions.
pub fn membership_integral(plan: &DivergencePlan, levels: usize) -> Result<MembershipIntegral, PlanError> {
    let lv = plan.truncated(levels)?;
    let bound = orlicz_membership_bound(plan, levels)?.bound;
    let per_level: Vec<Vec<(BigInt, BigInt)>> = lv.iter().map(|l| level_atoms(l.gamma)).collect();
    let total = per_level
        .iter()
        .try_fold(1u64, |acc, v| acc.checked_mul(v.len() as u64).filter(|&t| t <= MAX_ATOMS));
    if total.is_none() {
        return Err(PlanError::Budget {
            level: levels,
            gamma: lv.last().map_or(0, |l| l.gamma),
        });
    }
    let mut joint: Vec<(Vec<BigInt>, BigInt)> = vec![(Vec::new(), BigInt::one())];
    for atoms in &per_level {
        joint = joint
            .iter()
            .flat_map(|(qs, p)| {
                atoms.iter().map(move |(q, pq)| {
                    let mut next = qs.clone();
                    next.push(q.clone());
                    (next, p * pq)
                })
            })
            .collect();
    }
    let log2_denom = lv.iter().map(|l| 2 * l.gamma).sum();
    Ok(integrate(&plan.omega, lv, joint.into_iter(), log2_denom, &bound, "digit-block distribution"))
}

/// `2^{-m_A} Σ_cells ω(|f_A|)` by enumerating the grid at resolution `m_A`.
pub fn membership_grid(plan: &DivergencePlan, levels: usize, max_m: u64) -> Result<MembershipIntegral, PlanError> {
    let lv = plan.truncated(levels)?;
    let bound = orlicz_membership_bound(plan, levels)?.bound;
    let top = lv.last().and_then(|l| l.m_u64()).unwrap_or(0);
    if top > max_m {
        return Err(PlanError::Budget {
            level: levels,
            gamma: lv.last().map_or(0, |l| l.gamma),
        });
    }
    let grids: Vec<Vec<i64>> = lv
        .iter()
        .map(|l| {
            let bp = BlockPolynomial::new(l.m_u64().expect("checked"), l.gamma)?;
            dense_scaled(&bp, max_m)
        })
        .collect::<Result<_, _>>()?;
    let mut counts: BTreeMap<Vec<i64>, u64> = BTreeMap::new();
    for cell in 0..1u64 << top {
        let key = lv
            .iter()
            .zip(&grids)
            .map(|(l, g)| g[(cell >> (top - l.m_u64().expect("checked"))) as usize])
            .collect();
        *counts.entry(key).or_default() += 1;
    }
    let weighted = counts
        .into_iter()
        .map(|(k, c)| (k.into_iter().map(BigInt::from).collect(), BigInt::from(c)));
    Ok(integrate(&plan.omega, lv, weighted, top, &bound, "grid enumeration"))
}

/// Checks `integral <= bound <= majorant < 1/3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub bound: MembershipBound,
    pub integral: Option<MembershipIntegral>,
    pub grid: Option<MembershipIntegral>,
    pub holds: bool,
}

impl MembershipReport {
    pub fn summary(&self) -> String {
        format!(
            "integral {} <= bound {} <= majorant {} < 1/3",
            self.integral
                .as_ref()
                .map_or("n/a".into(), |i| i.exact.clone().unwrap_or(format!("{:.17}", i.value_f64))),
            rational_text(&self.bound.bound),
            rational_text(&self.bound.majorant)
        )
    }
}

pub fn membership_report(plan: &DivergencePlan, levels: usize, max_grid_m: u64) -> Result<MembershipReport, PlanError> {
    let bound = orlicz_membership_bound(plan, levels)?;
    let integral = match membership_integral(plan, levels) {
        Ok(i) => Some(i),
        Err(PlanError::Budget { .. }) => None,
        Err(e) => return Err(e),
    };
    let grid = match membership_grid(plan, levels, max_grid_m) {
        Ok(g) => Some(g),
        Err(PlanError::Budget { .. }) => None,
        Err(e) => return Err(e),
    };
    let holds = bound.bound_le_majorant
        && bound.majorant_below_third
        && integral.as_ref().is_none_or(|i| i.le_bound)
        && grid.as_ref().is_none_or(|g| g.le_bound)
        && match (&integral, &grid) {
            (Some(i), Some(g)) if i.exact.is_some() => i.exact == g.exact,
            _ => true,
        };
    Ok(MembershipReport {
        bound,
        integral,
        grid,
        holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diverge::plan::{choose_levels, PlanMode, PlanOptions};
    use crate::window::WindowSequence;

    fn rat(p: i64, q: i64) -> BigRational {
        BigRational::new(p.into(), q.into())
    }

    fn plan(mode: PlanMode, omega: OrliczFunction, levels: usize) -> DivergencePlan {
        let w = WindowSequence::root(rat(1, 2)).unwrap();
        choose_levels(&omega, &w, &mode, levels, PlanOptions::default()).unwrap()
    }

    #[test]
    fn atoms_sum_to_one() {
        for g in [1, 2, 5, 30] {
            let total = level_atoms(g).into_iter().fold(BigInt::zero(), |a, (_, c)| a + c);
            assert_eq!(total, BigInt::from(pow2(2 * g)));
        }
    }

    #[test]
    fn strict_single_level_bound() {
        let p = plan(PlanMode::Strict, OrliczFunction::identity(), 1);
        let b = orlicz_membership_bound(&p, 1).unwrap();
        assert_eq!(b.bound, rat(1, 4));
        assert!(b.bound_le_majorant && b.majorant_below_third);
    }

    #[test]
    fn grid_and_distribution_agree() {
        let p = plan(PlanMode::Relaxed { margin: rat(1, 32) }, OrliczFunction::identity(), 2);
        let r = membership_report(&p, 2, 16).unwrap();
        assert!(r.holds, "{r:?}");
        let (i, g) = (r.integral.unwrap(), r.grid.unwrap());
        assert_eq!(i.exact, g.exact);
        assert!(i.exact.is_some());
    }

    #[test]
    fn single_level_integral_is_exact_l1() {
        // ∫|P_{m,γ}| equals the l1 norm of the block polynomial.
        let p = plan(PlanMode::Relaxed { margin: rat(1, 4) }, OrliczFunction::identity(), 1);
        let i = membership_integral(&p, 1).unwrap();
        // γ = 2: |W| = 4·2/√2 = 4√2 with probability 1/8, δ = 1/4
        assert_eq!(i.exact.as_deref(), Some("1/8*sqrt(2)"));
    }

    #[test]
    fn relaxed_demo_chain() {
        let p = plan(PlanMode::Relaxed { margin: rat(1, 4) }, OrliczFunction::identity(), 2);
        let r = membership_report(&p, 2, 16).unwrap();
        assert!(r.holds, "{r:?}");
        assert!(r.grid.is_none());
    }

    #[test]
    fn log_power_is_flagged_inexact() {
        let p = plan(
            PlanMode::Relaxed { margin: rat(1, 4) },
            OrliczFunction::log_power(rat(1, 4)).unwrap(),
            2,
        );
        let r = membership_report(&p, 2, 16).unwrap();
        assert!(r.holds, "{r:?}");
        assert!(r.bound.terms.iter().all(|t| !t.ratio_exact));
        assert!(r.integral.unwrap().exact.is_none());
    }
}
