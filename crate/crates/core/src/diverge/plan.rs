//! Parameter chain `(γ_a, δ_a, m_a)` for `f = Σ_a δ_a P_{m_a,γ_a}`.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::block::biguint_text;
use crate::dyadic::pow2;
use crate::error::PlanError;
use crate::orlicz::OrliczFunction;
use crate::scalar::{parse_rational, rational_text};
use crate::surd::SurdSum;
use crate::window::WindowSequence;

/// Default cap on `γ_a`; `P_{m,γ}` has sup norm `2^γ √γ`, so `γ` is also
/// the bit length of the values the plan has to carry.
pub const DEFAULT_GAMMA_CAP: u64 = 1 << 16;
/// Bands `[2^m, 2^{m+1})` with `m` below this are searched exhaustively.
pub const SCAN_BITS: u64 = 20;
/// Largest `N` (in bits) evaluated exactly when checking a band.
pub const MATERIALIZE_BITS: u64 = 1 << 15;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum PlanMode {
    /// Margin 16.
    Strict,
    Relaxed { margin: BigRational },
}

impl PlanMode {
    pub fn margin(&self) -> BigRational {
        match self {
            PlanMode::Strict => BigRational::from_integer(16.into()),
            PlanMode::Relaxed { margin } => margin.clone(),
        }
    }

    pub fn is_strict(&self) -> bool {
        matches!(self, PlanMode::Strict)
    }
}

impl fmt::Display for PlanMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanMode::Strict => write!(f, "strict"),
            PlanMode::Relaxed { margin } => write!(f, "relaxed:{}", rational_text(margin)),
        }
    }
}

impl From<PlanMode> for String {
    fn from(m: PlanMode) -> String {
        m.to_string()
    }
}

impl TryFrom<String> for PlanMode {
    type Error = PlanError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl std::str::FromStr for PlanMode {
    type Err = PlanError;

    /// `strict` or `relaxed:<margin>` with a positive rational margin.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PlanError::Mode(s.to_string());
        match s.trim().split_once(':') {
            None if s.trim() == "strict" => Ok(PlanMode::Strict),
            Some(("relaxed", m)) => {
                let margin = parse_rational(m).ok_or_else(bad)?;
                if margin <= BigRational::zero() {
                    return Err(bad());
                }
                Ok(PlanMode::Relaxed { margin })
            }
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaValue {
    #[serde(with = "rational_serde")]
    pub value: BigRational,
    /// False when `ω(4^q)/4^q` was replaced by a rational upper bound.
    pub exact: bool,
}

/// `min{2^{-a}, 4^q / (4^a ω(4^q))}`, rounded down when `ω` is irrational
/// at `4^q`.
pub fn delta(a: u64, q: u64, omega: &OrliczFunction) -> DeltaValue {
    let (ratio, exact) = omega.ratio_upper_at_pow2(2 * q);
    let four_a = BigRational::from_integer(BigInt::from(pow2(2 * a)));
    let scaled = (four_a * ratio).recip();
    let cap = BigRational::new(BigInt::one(), BigInt::from(pow2(a)));
    DeltaValue {
        value: scaled.min(cap),
        exact,
    }
}

/// `margin · (a + Σ_{k<a} δ_k 2^{γ_k} √γ_k)`.
fn gamma_rhs(mode: &PlanMode, a: u64, running: &SurdSum) -> SurdSum {
    SurdSum::rational(BigRational::from_integer(a.into()))
        .add(running)
        .scale(&mode.margin())
}

/// `δ(a, γ) √γ > rhs`.
fn gamma_holds(a: u64, gamma: u64, omega: &OrliczFunction, rhs: &SurdSum) -> bool {
    SurdSum::term(delta(a, gamma, omega).value, gamma).gt(rhs)
}

/// `δ 2^γ √γ`, the sup norm of `δ P_{m,γ}`.
pub fn level_sup(delta: &BigRational, gamma: u64) -> SurdSum {
    SurdSum::term(delta * BigInt::from(pow2(gamma)), gamma)
}

/// `(3/16) δ √γ`.
pub fn level_target(delta: &BigRational, gamma: u64) -> SurdSum {
    SurdSum::term(delta * BigRational::new(3.into(), 16.into()), gamma)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GammaChoice {
    pub a: u64,
    pub gamma: u64,
    pub delta: DeltaValue,
}

/// Levels whose `γ_a` exceeds the cap, described by their defining
/// recurrence instead of numbers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolicTail {
    pub from_level: u64,
    pub to_level: u64,
    pub gamma_cap: u64,
    /// `γ_{from_level} >= 2^{gamma_lower_bound_bits - 1}`.
    pub gamma_lower_bound_bits: u64,
    pub recurrence: Vec<String>,
}

fn recurrence_text(mode: &PlanMode) -> Vec<String> {
    let margin = rational_text(&mode.margin());
    vec![
        format!(
            "gamma_a = min{{ g >= 1 : delta(a, g) sqrt(g) > {margin} (a + sum_(k<a) delta_k 2^gamma_k sqrt(gamma_k)) }}"
        ),
        "delta_a = min{ 2^-a, 4^gamma_a / (4^a omega(4^gamma_a)) }".into(),
        "m_a = min{ m > m_(a-1) + 2 gamma_a : some N with |N| = m has N / lambda_N > 2^(2 gamma_a + 1) }".into(),
    ]
}

/// Smallest `γ_a` for each level in turn, stopping at the cap.
pub fn choose_gammas(
    omega: &OrliczFunction,
    mode: &PlanMode,
    levels: usize,
    gamma_cap: u64,
) -> Result<(Vec<GammaChoice>, Option<SymbolicTail>), PlanError> {
    if levels == 0 {
        return Err(PlanError::NoLevels);
    }
    let mut out = Vec::new();
    let mut running = SurdSum::zero();
    for a in 1..=levels as u64 {
        let rhs = gamma_rhs(mode, a, &running);
        match smallest_gamma(a, omega, &rhs, gamma_cap) {
            Ok(gamma) => {
                let d = delta(a, gamma, omega);
                running.add_assign(&level_sup(&d.value, gamma));
                out.push(GammaChoice { a, gamma, delta: d });
            }
            Err(lower) => {
                let tail = SymbolicTail {
                    from_level: a,
                    to_level: levels as u64,
                    gamma_cap,
                    gamma_lower_bound_bits: lower.bits(),
                    recurrence: recurrence_text(mode),
                };
                return Ok((out, Some(tail)));
            }
        }
    }
    Ok((out, None))
}

/// `Err(lower)` when every admissible `γ` exceeds the cap; `lower` is a
/// proven lower bound on the answer.
fn smallest_gamma(a: u64, omega: &OrliczFunction, rhs: &SurdSum, cap: u64) -> Result<u64, BigUint> {
    // δ <= 2^{-a}, so δ√γ < rhs for every γ < (2^a rhs_lo)^2.
    let bound = rhs.lower_bound(64) * BigInt::from(pow2(a));
    let start = if bound > BigRational::zero() {
        let sq = &bound * &bound;
        sq.numer().div_floor(sq.denom()).to_biguint().unwrap_or_default()
    } else {
        BigUint::zero()
    };
    let start = start.max(BigUint::one());
    let Some(mut lo) = start.to_u64().filter(|&g| g <= cap) else {
        return Err(start);
    };
    let holds = |g: u64| gamma_holds(a, g, omega, rhs);
    if holds(lo) {
        return Ok(lo);
    }
    // Gallop to a passing γ, then bisect (lo fails, hi passes).
    let mut step = 1u64;
    let mut hi = loop {
        let next = lo.saturating_add(step).min(cap);
        if holds(next) {
            break next;
        }
        if next == cap {
            return Err(BigUint::from(cap) + 1u32);
        }
        lo = next;
        step = step.saturating_mul(2);
    };
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // The inequality need not be monotone in γ for every ω.
    while hi > start.to_u64().unwrap_or(1) && holds(hi - 1) {
        hi -= 1;
    }
    Ok(hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WitnessKind {
    /// Every `N` in the band was tried.
    BandScan,
    /// `N = 2^{m+1} - 1` was checked exactly.
    BandTop,
    /// The window family's analytic statement at `N = 2^m`.
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessNote {
    pub kind: WitnessKind,
    /// `s` in `N / λ_N > 2^s`.
    pub log2_threshold: u64,
    pub statement: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelPlan {
    pub a: u64,
    pub gamma: u64,
    pub delta: DeltaValue,
    #[serde(with = "biguint_text")]
    pub m: BigUint,
    pub witness: WitnessNote,
}

impl LevelPlan {
    pub fn m_u64(&self) -> Option<u64> {
        self.m.to_u64()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivergencePlan {
    pub mode: PlanMode,
    pub omega: OrliczFunction,
    pub window: WindowSequence,
    pub requested_levels: usize,
    pub gamma_cap: u64,
    pub levels: Vec<LevelPlan>,
    pub symbolic_tail: Option<SymbolicTail>,
}

impl DivergencePlan {
    pub fn numeric_levels(&self) -> usize {
        self.levels.len()
    }

    /// The first `count` levels, or an error when fewer are numeric.
    pub fn truncated(&self, count: usize) -> Result<&[LevelPlan], PlanError> {
        self.levels.get(..count).ok_or(PlanError::Truncation {
            requested: count,
            available: self.levels.len(),
        })
    }
}

/// `N > λ_N 2^s`.
fn ratio_exceeds(window: &WindowSequence, n: &BigUint, s: u64) -> Result<bool, PlanError> {
    Ok(*n > window.at(n)? << s)
}

/// Whether some `N` in `[2^m, 2^{m+1})` has `N / λ_N > 2^s`.
fn band_scan(window: &WindowSequence, m: u64, s: u64) -> Result<bool, PlanError> {
    if s > m {
        return Ok(false);
    }
    let lo = 1u64 << m;
    let hi = (lo << 1).min(window.materialized_len().map_or(u64::MAX, |l| l + 1));
    for n in lo..hi {
        if u128::from(n) > u128::from(window.at_u64(n)?) << s {
            return Ok(true);
        }
    }
    Ok(false)
}

fn band_top(window: &WindowSequence, m: u64, s: u64) -> Result<bool, PlanError> {
    ratio_exceeds(window, &(pow2(m + 1) - 1u32), s)
}

fn witness_note(window: &WindowSequence, kind: WitnessKind, s: u64) -> WitnessNote {
    let statement = match kind {
        WitnessKind::BandScan => format!("some N with |N| = m has N > lambda_N * 2^{s} (exhaustive band scan)"),
        WitnessKind::BandTop => format!("N = 2^(m+1) - 1 has N > lambda_N * 2^{s} (exact)"),
        WitnessKind::Analytic => window.witness_statement().unwrap_or_default(),
    };
    WitnessNote {
        kind,
        log2_threshold: s,
        statement,
    }
}

/// Smallest `m >= m_lo` admitting `N` with `|N| = m` and `N/λ_N > 2^s`.
fn choose_m(window: &WindowSequence, m_lo: &BigUint, s: u64) -> Result<(BigUint, WitnessKind), PlanError> {
    let len = window.materialized_len();
    let scan_top = len.map_or(SCAN_BITS, |l| u64::from(l.ilog2()) + 1).min(SCAN_BITS);
    let mut m = m_lo.clone();
    while let Some(mu) = m.to_u64().filter(|&v| v < scan_top) {
        if band_scan(window, mu, s)? {
            return Ok((m, WitnessKind::BandScan));
        }
        m += 1u32;
    }
    let Some(mw) = window.witness_exponent(s) else {
        return Err(PlanError::NoWitness {
            limit: len.map_or_else(|| pow2(SCAN_BITS).to_string(), |l| l.to_string()),
            log2_threshold: s,
        });
    };
    if mw <= m {
        return Ok((m, WitnessKind::Analytic));
    }
    let Some(top) = mw.to_u64().filter(|&v| v < MATERIALIZE_BITS) else {
        return Ok((mw, WitnessKind::Analytic));
    };
    // Bisect on the band-top check, then walk down past any gaps.
    let base = m.to_u64().expect("m <= mw fits");
    let (mut lo, mut hi) = (base, top);
    if band_top(window, top, s)? {
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if band_top(window, mid, s)? {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        while hi > base && band_top(window, hi - 1, s)? {
            hi -= 1;
        }
        return Ok((BigUint::from(hi), WitnessKind::BandTop));
    }
    Ok((mw, WitnessKind::Analytic))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanOptions {
    pub gamma_cap: u64,
}

impl Default for PlanOptions {
    fn default() -> Self {
        PlanOptions {
            gamma_cap: DEFAULT_GAMMA_CAP,
        }
    }
}

/// Full plan: `γ_a`, `δ_a`, then `m_a` for every numeric level.
pub fn choose_levels(
    omega: &OrliczFunction,
    window: &WindowSequence,
    mode: &PlanMode,
    levels: usize,
    options: PlanOptions,
) -> Result<DivergencePlan, PlanError> {
    if let Some(bound) = window.bounded_ratio() {
        return Err(PlanError::BoundedRatio {
            bound: rational_text(&bound),
        });
    }
    let (gammas, symbolic_tail) = choose_gammas(omega, mode, levels, options.gamma_cap)?;
    let mut out = Vec::with_capacity(gammas.len());
    let mut m_prev = BigUint::zero();
    for g in gammas {
        let s = 2 * g.gamma + 1;
        let m_lo = &m_prev + s;
        let (m, kind) = choose_m(window, &m_lo, s)?;
        m_prev = m.clone();
        out.push(LevelPlan {
            a: g.a,
            gamma: g.gamma,
            delta: g.delta,
            m,
            witness: witness_note(window, kind, s),
        });
    }
    Ok(DivergencePlan {
        mode: mode.clone(),
        omega: omega.clone(),
        window: window.clone(),
        requested_levels: levels,
        gamma_cap: options.gamma_cap,
        levels: out,
        symbolic_tail,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelAudit {
    pub a: u64,
    /// Stored `δ_a` equals a fresh evaluation and is at most `2^{-a}`.
    pub delta_ok: bool,
    pub gamma_inequality: bool,
    /// `γ_a - 1` fails the inequality (or `γ_a = 1`).
    pub gamma_minimal: bool,
    /// `m_a > m_{a-1} + 2γ_a`
    pub separation: bool,
    /// Some `N` with `|N| = m_a` has `N / λ_N > 2^{2γ_a+1}`.
    pub n_choice: bool,
}

impl LevelAudit {
    pub fn holds(&self) -> bool {
        self.delta_ok && self.gamma_inequality && self.gamma_minimal && self.separation && self.n_choice
    }
}

/// Re-verifies every level from scratch in exact arithmetic.
pub fn audit_plan(plan: &DivergencePlan) -> Result<Vec<LevelAudit>, PlanError> {
    let mut running = SurdSum::zero();
    let mut m_prev = BigUint::zero();
    let mut out = Vec::new();
    for lv in &plan.levels {
        let fresh = delta(lv.a, lv.gamma, &plan.omega);
        let cap = BigRational::new(BigInt::one(), BigInt::from(pow2(lv.a)));
        let delta_ok = fresh == lv.delta && lv.delta.value <= cap;
        let rhs = gamma_rhs(&plan.mode, lv.a, &running);
        let gamma_inequality = SurdSum::term(lv.delta.value.clone(), lv.gamma).gt(&rhs);
        let gamma_minimal = lv.gamma == 1 || !gamma_holds(lv.a, lv.gamma - 1, &plan.omega, &rhs);
        let separation = lv.m > &m_prev + 2 * lv.gamma;
        let s = 2 * lv.gamma + 1;
        let n_choice = match lv.witness.kind {
            WitnessKind::BandScan => band_scan(&plan.window, lv.m.to_u64().unwrap_or(u64::MAX), s)?,
            WitnessKind::BandTop => band_top(&plan.window, lv.m.to_u64().unwrap_or(u64::MAX), s)?,
            WitnessKind::Analytic => plan.window.witness_exponent(s).is_some_and(|mw| lv.m >= mw),
        };
        running.add_assign(&level_sup(&lv.delta.value, lv.gamma));
        m_prev = lv.m.clone();
        out.push(LevelAudit {
            a: lv.a,
            delta_ok,
            gamma_inequality,
            gamma_minimal,
            separation,
            n_choice,
        });
    }
    if let Some(bad) = out.iter().find(|l| !l.holds()) {
        return Err(PlanError::Invariant {
            level: bad.a as usize,
            detail: format!("{bad:?}"),
        });
    }
    Ok(out)
}

/// The x-independent inequalities behind the pointwise lower bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReplay {
    pub a: u64,
    /// `(3/16) δ_a √γ_a`
    pub target: String,
    pub target_f64: f64,
    /// `((3/16) δ_a)^2 γ_a`, compared against `9 a^2`.
    pub target_squared: String,
    pub three_a_squared: String,
    pub exceeds_3a: bool,
    /// `Σ_{k<a} δ_k 2^{γ_k} √γ_k`, the bound on `|II_a|`.
    pub ii_bound: String,
    /// `ii_bound < (1/16) δ_a √γ_a`
    pub ii_below_sixteenth: bool,
    /// Target exceeds the previous level's target.
    pub target_increasing: bool,
}

pub fn replay_inequalities(plan: &DivergencePlan) -> Vec<LevelReplay> {
    let mut running = SurdSum::zero();
    let mut prev_target: Option<SurdSum> = None;
    plan.levels
        .iter()
        .map(|lv| {
            let d = &lv.delta.value;
            let target = level_target(d, lv.gamma);
            let coeff = d * BigRational::new(3.into(), 16.into());
            let target_squared = &coeff * &coeff * BigInt::from(lv.gamma);
            let three_a_squared = BigRational::from_integer(BigInt::from(9u64) * lv.a * lv.a);
            let sixteenth = SurdSum::term(d / BigInt::from(16), lv.gamma);
            let replay = LevelReplay {
                a: lv.a,
                target: target.to_string(),
                target_f64: target.to_f64(),
                target_squared: rational_text(&target_squared),
                three_a_squared: rational_text(&three_a_squared),
                exceeds_3a: target_squared > three_a_squared,
                ii_bound: running.to_string(),
                ii_below_sixteenth: running.cmp_exact(&sixteenth) == Ordering::Less,
                target_increasing: prev_target.as_ref().is_none_or(|p| target.gt(p)),
            };
            running.add_assign(&level_sup(d, lv.gamma));
            prev_target = Some(target);
            replay
        })
        .collect()
}

pub(crate) mod rational_serde {
    use num_rational::BigRational;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    use crate::scalar::{parse_rational, rational_text};

    pub fn serialize<S: Serializer>(v: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&rational_text(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).ok_or_else(|| D::Error::custom(format!("bad rational {s:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(p: i64, q: i64) -> BigRational {
        BigRational::new(p.into(), q.into())
    }

    fn root_half() -> WindowSequence {
        WindowSequence::root(rat(1, 2)).unwrap()
    }

    fn relaxed(p: i64, q: i64) -> PlanMode {
        PlanMode::Relaxed { margin: rat(p, q) }
    }

    #[test]
    fn delta_examples() {
        let id = OrliczFunction::identity();
        for a in 1..6 {
            for q in [1, 5, 40] {
                let d = delta(a, q, &id);
                assert!(d.exact);
                assert_eq!(d.value, BigRational::new(1.into(), BigInt::from(pow2(2 * a))));
            }
        }
        let lp = OrliczFunction::log_power(rat(1, 4)).unwrap();
        let d = delta(2, 8, &lp);
        let truth = 1.0 / (16.0 * 65536f64.ln_1p().powf(0.25));
        let v = d.value.to_f64().unwrap();
        assert!(!d.exact);
        assert!(v <= truth && v > truth * (1.0 - 1e-9));
    }

    #[test]
    fn strict_first_gamma() {
        let (g, tail) = choose_gammas(&OrliczFunction::identity(), &PlanMode::Strict, 1, DEFAULT_GAMMA_CAP).unwrap();
        assert!(tail.is_none());
        assert_eq!(g[0].gamma, 4097);
        assert_eq!(g[0].delta.value, rat(1, 4));
    }

    #[test]
    fn strict_second_level_is_symbolic() {
        let (g, tail) = choose_gammas(&OrliczFunction::identity(), &PlanMode::Strict, 3, DEFAULT_GAMMA_CAP).unwrap();
        assert_eq!(g.len(), 1);
        let tail = tail.unwrap();
        assert_eq!((tail.from_level, tail.to_level), (2, 3));
        assert!(tail.gamma_lower_bound_bits > 8000);
    }

    #[test]
    fn relaxed_gammas() {
        let id = OrliczFunction::identity();
        let (g, _) = choose_gammas(&id, &relaxed(1, 4), 2, DEFAULT_GAMMA_CAP).unwrap();
        assert_eq!((g[0].gamma, g[1].gamma), (2, 187));
        let (g, _) = choose_gammas(&id, &relaxed(1, 32), 2, DEFAULT_GAMMA_CAP).unwrap();
        assert_eq!((g[0].gamma, g[1].gamma), (1, 2));
    }

    #[test]
    fn gamma_scan_matches_brute_force() {
        // Plain linear scan with float-free comparisons.
        for omega in [OrliczFunction::identity(), OrliczFunction::log_power(rat(1, 3)).unwrap()] {
            for (p, q) in [(1, 4), (1, 2), (1, 1), (1, 32)] {
                let mode = relaxed(p, q);
                let (g, _) = choose_gammas(&omega, &mode, 2, DEFAULT_GAMMA_CAP).unwrap();
                let mut running = SurdSum::zero();
                for c in &g {
                    let rhs = gamma_rhs(&mode, c.a, &running);
                    let first = (1..).find(|&x| gamma_holds(c.a, x, &omega, &rhs)).unwrap();
                    assert_eq!(first, c.gamma);
                    running.add_assign(&level_sup(&c.delta.value, c.gamma));
                }
            }
        }
    }

    #[test]
    fn levels_for_root_window() {
        let id = OrliczFunction::identity();
        let plan = choose_levels(&id, &root_half(), &relaxed(1, 32), 2, PlanOptions::default()).unwrap();
        let ms: Vec<u64> = plan.levels.iter().map(|l| l.m_u64().unwrap()).collect();
        assert_eq!(ms, vec![5, 10]);
        assert!(audit_plan(&plan).is_ok());

        let plan = choose_levels(&id, &root_half(), &relaxed(1, 4), 2, PlanOptions::default()).unwrap();
        let ms: Vec<u64> = plan.levels.iter().map(|l| l.m_u64().unwrap()).collect();
        assert_eq!(ms, vec![9, 749]);
        assert_eq!(plan.levels[1].witness.kind, WitnessKind::BandTop);
        assert!(audit_plan(&plan).is_ok());
    }

    #[test]
    fn gamma_two_first_band() {
        // 993 = 31·32 + 1 and λ_993 = 31
        let w = root_half();
        assert!(993 > w.at_u64(993).unwrap() * 32);
        assert!(!band_scan(&w, 8, 5).unwrap());
        assert!(band_scan(&w, 9, 5).unwrap());
        assert_eq!(choose_m(&w, &BigUint::from(5u32), 5).unwrap().0, BigUint::from(9u32));
        assert_eq!(choose_m(&w, &BigUint::from(10u32), 5).unwrap().0, BigUint::from(10u32));
    }

    #[test]
    fn strict_level_one() {
        let plan = choose_levels(
            &OrliczFunction::identity(),
            &root_half(),
            &PlanMode::Strict,
            1,
            PlanOptions::default(),
        )
        .unwrap();
        let lv = &plan.levels[0];
        assert_eq!(lv.gamma, 4097);
        assert_eq!(lv.m, BigUint::from(16389u32));
        assert_eq!(root_half().witness_exponent(8195), Some(BigUint::from(16391u32)));
        let r = replay_inequalities(&plan);
        assert!(r[0].exceeds_3a);
        assert_eq!(r[0].target_squared, "36873/4096");
        assert!(audit_plan(&plan).is_ok());
    }

    #[test]
    fn proportional_has_no_plan() {
        let w = WindowSequence::proportional(rat(1, 2)).unwrap();
        let e = choose_levels(&OrliczFunction::identity(), &w, &PlanMode::Strict, 1, PlanOptions::default());
        assert!(matches!(e, Err(PlanError::BoundedRatio { bound }) if bound == "2"));
    }

    #[test]
    fn table_window_without_witness() {
        let w = WindowSequence::table((1..=100).collect()).unwrap();
        let e = choose_levels(&OrliczFunction::identity(), &w, &relaxed(1, 4), 1, PlanOptions::default());
        assert!(matches!(e, Err(PlanError::NoWitness { .. })));
    }

    #[test]
    fn other_window_families() {
        let id = OrliczFunction::identity();
        let c = WindowSequence::constant(3).unwrap();
        let plan = choose_levels(&id, &c, &relaxed(1, 4), 2, PlanOptions::default()).unwrap();
        assert!(audit_plan(&plan).is_ok());
        // N > 3·2^5 first happens at N = 97, |97| = 6
        assert_eq!(plan.levels[0].m, BigUint::from(6u32));
        let lr = WindowSequence::log_ratio();
        let plan = choose_levels(&id, &lr, &relaxed(1, 4), 2, PlanOptions::default()).unwrap();
        assert!(audit_plan(&plan).is_ok());
        assert_eq!(plan.levels[1].witness.kind, WitnessKind::Analytic);
    }

    #[test]
    fn audit_catches_tampering() {
        let id = OrliczFunction::identity();
        let mut plan = choose_levels(&id, &root_half(), &relaxed(1, 32), 2, PlanOptions::default()).unwrap();
        plan.levels[1].m = BigUint::from(8u32);
        assert!(audit_plan(&plan).is_err());
        let mut plan = choose_levels(&id, &root_half(), &relaxed(1, 32), 2, PlanOptions::default()).unwrap();
        plan.levels[0].gamma = 2;
        assert!(audit_plan(&plan).is_err());
    }

    #[test]
    fn mode_text() {
        for s in ["strict", "relaxed:1/4", "relaxed:3"] {
            assert_eq!(s.parse::<PlanMode>().unwrap().to_string(), s);
        }
        assert!("relaxed:0".parse::<PlanMode>().is_err());
        assert!("loose".parse::<PlanMode>().is_err());
    }

    #[test]
    fn plan_json_roundtrip() {
        let plan = choose_levels(
            &OrliczFunction::identity(),
            &root_half(),
            &relaxed(1, 4),
            2,
            PlanOptions::default(),
        )
        .unwrap();
        let text = serde_json::to_string(&plan).unwrap();
        assert!(text.contains("\"m\":\"749\""));
        assert!(text.contains("\"mode\":\"relaxed:1/4\""));
        let back: DivergencePlan = serde_json::from_str(&text).unwrap();
        assert_eq!(back, plan);
    }
}
