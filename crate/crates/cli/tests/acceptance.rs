//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always reach the output.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use walsh_vp::block::{corollary_replay, dense_scaled, verify_prop21, BlockPolynomial};
use walsh_vp::diverge::{
    audit_plan, certify_default, certify_divergence, choose_levels, default_samples, membership_report,
    replay_inequalities, DivergencePlan, PlanMode, PlanOptions,
};
use walsh_vp::error::BlockError;
use walsh_vp::means::{convergence_errors, domination_check, sigma_star, weak_type_sup};
use walsh_vp::orlicz::OrliczFunction;
use walsh_vp::random::{random_grid, random_rational_grid, random_unit_l1, random_walsh_polynomial, DEFAULT_SEED};
use walsh_vp::surd::SurdSum;
use walsh_vp::walsh::{
    forward_fwht, inverse_fwht, partial_sum_all, DenseBudget, GridFunction, PartialSumStrategy,
};
use walsh_vp::window::WindowSequence;
use walsh_vp_cli::config::RunConfig;
use walsh_vp_cli::report::{ReportEnvelope, Status, Throughput, Timing};

/// Elementwise tolerance for floating transforms.
const ELEMENT_TOL: f64 = 1e-12;
const PROP_SUITE_LIMIT: Duration = Duration::from_secs(120);
const STRICT_PLAN_LIMIT: Duration = Duration::from_secs(1);
const DEMO_LIMIT: Duration = Duration::from_secs(300);

type Check = Result<String, String>;

fn rat(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// `w_k(i / 2^M)` as a product of Rademacher signs.
fn walsh_oracle(k: u64, i: u64, m: u32) -> i64 {
    (0..m).fold(1, |s, j| {
        if (k >> j) & 1 == 1 && (i >> (m - 1 - j)) & 1 == 1 {
            -s
        } else {
            s
        }
    })
}

fn relaxed_plan(margin: BigRational) -> DivergencePlan {
    choose_levels(
        &OrliczFunction::identity(),
        &WindowSequence::root(rat(1, 2)).unwrap(),
        &PlanMode::Relaxed { margin },
        2,
        PlanOptions::default(),
    )
    .unwrap()
}

fn block_shapes() -> impl Iterator<Item = (u64, u64)> {
    (1u64..=5).flat_map(|g| (2 * g + 1..=12).map(move |m| (m, g)))
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let mut shapes = 0;
    for (m, g) in block_shapes() {
        let bp = BlockPolynomial::new(m, g).unwrap();
        let cert = verify_prop21(&bp, 12).map_err(|e| format!("(m, γ) = ({m}, {g}): {e}"))?;
        ensure(cert.holds && cert.ell.passed == 1 << m, || format!("(m, γ) = ({m}, {g}) fails"))?;
        shapes += 1;
    }
    // ‖P_{6,2}‖₁ from sign vectors: on E (measure 1/4) P = 4(ε₁+ε₂)/√2
    let sign_sum: i64 = (0..4u32)
        .map(|s| {
            let e1 = if s & 1 == 0 { 1i64 } else { -1 };
            let e2 = if s & 2 == 0 { 1i64 } else { -1 };
            (e1 + e2).abs()
        })
        .sum();
    // √2 ‖P‖₁ = sign_sum / 2^γ
    let scaled_from_signs = rat(sign_sum, 4);
    let bp = BlockPolynomial::new(6, 2).unwrap();
    let dense = dense_scaled(&bp, 12).unwrap();
    let scaled_from_grid = rat(dense.iter().map(|q| q.abs()).sum::<i64>(), 64);
    let cert = verify_prop21(&bp, 12).unwrap();
    ensure(scaled_from_signs == BigRational::from_integer(1.into()), || {
        format!("sign enumeration gives √2‖P‖₁ = {scaled_from_signs}")
    })?;
    ensure(scaled_from_grid == scaled_from_signs && cert.l1.scaled_norm == "1", || {
        format!("grid {scaled_from_grid}, certificate {}", cert.l1.scaled_norm)
    })?;
    let elapsed = start.elapsed();
    ensure(elapsed < PROP_SUITE_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!("{shapes} shapes exhaustive, ‖P_{{6,2}}‖₁ = 1/√2, {elapsed:.2?}"))
}

fn criterion_2() -> Check {
    let mut pairs = 0u64;
    for (m, g) in block_shapes() {
        let bp = BlockPolynomial::new(m, g).unwrap();
        let b = 1u64 << (m - 2 * g);
        let windows: Vec<u64> = (1..b).collect();
        pairs += corollary_replay(&bp, &windows).map_err(|e| format!("(m, γ) = ({m}, {g}): {e}"))?;
        let boundary = corollary_replay(&bp, &[b]);
        ensure(matches!(boundary, Err(BlockError::WindowTooWide { .. })), || {
            format!("(m, γ) = ({m}, {g}): λ ≡ {b} was not rejected")
        })?;
    }
    Ok(format!("{pairs} (x, c) pairs, boundary window rejected for every shape"))
}

fn criterion_3() -> Check {
    for m in 0..=8u32 {
        let f = random_rational_grid(m, DEFAULT_SEED + u64::from(m));
        let c = forward_fwht(&f);
        let len = 1u64 << m;
        for k in 0..len {
            let direct = (0..len).fold(BigRational::zero(), |acc, i| {
                acc + &f.values()[i as usize] * BigRational::from_integer(walsh_oracle(k, i, m).into())
            }) / BigRational::from_integer(BigInt::from(len));
            ensure(c.coeffs()[k as usize] == direct, || format!("M = {m}, k = {k}"))?;
        }
    }
    for m in 0..=12u32 {
        let f = random_grid(m, DEFAULT_SEED ^ u64::from(m));
        let c = forward_fwht(&f);
        let total: f64 = f.values().iter().map(|v| v * v).sum();
        let energy: f64 = c.coeffs().iter().map(|v| v * v).sum();
        ensure((energy - total / f.len() as f64).abs() <= ELEMENT_TOL * total.max(1.0), || {
            format!("Parseval fails at M = {m}")
        })?;
        let back = inverse_fwht(&c);
        let worst = back.values().iter().zip(f.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ensure(worst <= ELEMENT_TOL, || format!("roundtrip error {worst:e} at M = {m}"))?;
        let exact = random_rational_grid(m, DEFAULT_SEED ^ u64::from(m));
        let ce = forward_fwht(&exact);
        let energy = ce.coeffs().iter().fold(BigRational::zero(), |a, v| a + v * v);
        let mean_sq = exact.values().iter().fold(BigRational::zero(), |a, v| a + v * v)
            / BigRational::from_integer(BigInt::from(exact.len()));
        ensure(energy == mean_sq && inverse_fwht(&ce) == exact, || format!("exact M = {m}"))?;
    }
    for m in 0..=7u32 {
        let f = random_rational_grid(m, 17 + u64::from(m));
        let budget = DenseBudget { max_resolution: 12 };
        let a = partial_sum_all(&f, PartialSumStrategy::Incremental, budget).unwrap();
        let b = partial_sum_all(&f, PartialSumStrategy::RowInverse, budget).unwrap();
        ensure(a == b, || format!("strategies differ at M = {m}"))?;
    }
    Ok("oracle exhaustive M ≤ 8; Parseval/roundtrip M ≤ 12 (1e-12 and exact); strategies equal M ≤ 7".into())
}

fn criterion_4() -> Check {
    let start = Instant::now();
    let m = 10u32;
    let window = WindowSequence::proportional(rat(1, 2)).unwrap();
    let mut checked = 0usize;
    for s in 0..50u64 {
        let f: GridFunction<BigRational> = random_walsh_polynomial(1 << 8, m, DEFAULT_SEED + s);
        let errors = convergence_errors(&f, &window, 1 << m).unwrap();
        for (n, e) in errors.iter().filter(|(n, _)| *n >= 1 << 9) {
            ensure(e.is_zero(), || format!("sample {s}: ‖V_{n} f − f‖ = {e}"))?;
            checked += 1;
        }
    }
    let identity_time = start.elapsed();
    let theta = rat(1, 2);
    for s in 0..3u64 {
        let f = random_rational_grid(m, 99 + s);
        let report = domination_check(&f, &window, &theta, 1 << m).unwrap();
        ensure(report.holds && report.constant == "3", || format!("domination fails: {report:?}"))?;
    }
    Ok(format!(
        "{checked} (f, n) pairs with zero error [{identity_time:.2?}]; domination with C = 3 at M = 10 exact [{:.2?}]",
        start.elapsed() - identity_time
    ))
}

fn criterion_5() -> Check {
    let m = 12u32;
    let run = |s: u64| weak_type_sup(&sigma_star(&random_unit_l1(m, DEFAULT_SEED + s), 1 << m));
    let sups: Vec<f64> = (0..100).map(|s| run(s).value).collect();
    ensure(sups.iter().all(|v| v.is_finite() && *v > 0.0), || "non-finite profile".into())?;
    for s in [0u64, 37, 99] {
        ensure(run(s).value.to_bits() == sups[s as usize].to_bits(), || format!("sample {s} not reproducible"))?;
    }
    let max = sups.iter().copied().fold(0.0, f64::max);
    Ok(format!("empirical sup_t t·|{{σ*f > t}}| over 100 inputs = {max:.6}"))
}

fn criterion_6() -> Check {
    let start = Instant::now();
    let plan = choose_levels(
        &OrliczFunction::identity(),
        &WindowSequence::root(rat(1, 2)).unwrap(),
        &PlanMode::Strict,
        1,
        PlanOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    audit_plan(&plan).map_err(|e| e.to_string())?;
    let replay = replay_inequalities(&plan);
    let elapsed = start.elapsed();
    let lv = &plan.levels[0];
    ensure(lv.gamma == 4097 && lv.delta.value == rat(1, 4), || {
        format!("γ₁ = {}, δ₁ = {}", lv.gamma, lv.delta.value)
    })?;
    // ((3/16)(1/4))² · 4097 against 3²
    let lhs = rat(3, 64) * rat(3, 64) * BigRational::from_integer(4097.into());
    let rhs = BigRational::from_integer(9.into());
    ensure(lhs > rhs && replay[0].exceeds_3a && replay[0].target_squared == "36873/4096", || {
        format!("replay {:?}", replay[0])
    })?;
    ensure(elapsed < STRICT_PLAN_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!("γ₁ = 4097, δ₁ = 1/4, m₁ = {}, 36873/4096 > 9, {elapsed:.2?}", lv.m))
}

fn criterion_7() -> Check {
    let start = Instant::now();
    let plan = relaxed_plan(rat(1, 4));
    audit_plan(&plan).map_err(|e| e.to_string())?;
    let shape: Vec<(u64, String)> = plan.levels.iter().map(|l| (l.gamma, l.m.to_string())).collect();
    let mut points = 0;
    let mut certs = vec![certify_default(&plan, 2).map_err(|e| e.to_string())?];
    let (spec, pts) = default_samples(&plan, 2, 64, 64).map_err(|e| e.to_string())?;
    certs.push(certify_divergence(&plan, 2, spec, &pts).map_err(|e| e.to_string())?);
    for cert in &certs {
        for p in &cert.points {
            for l in &p.levels {
                ensure(l.iii_zero && l.brute_force_equal && l.meets_target, || {
                    format!("x = {}, level {}: {l:?}", p.x, l.a)
                })?;
            }
        }
        ensure(cert.summary.all_pass, || format!("{:?}", cert.summary))?;
        points += cert.points.len();
    }
    let elapsed = start.elapsed();
    ensure(elapsed < DEMO_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!("(γ, m) = {shape:?}, {points} points, III = 0, brute force = I + II, |V| ≥ target, {elapsed:.2?}"))
}

/// `∫|f_A|` for the identity from the per-level value distributions:
/// level `a` is `2^γ (γ − 2i)/√γ` with weight `C(γ, i)/4^γ`, else 0.
fn identity_integral_oracle(plan: &DivergencePlan) -> (SurdSum, f64) {
    let mut atoms: Vec<(Vec<(BigRational, u64)>, BigRational)> = vec![(Vec::new(), BigRational::from_integer(1.into()))];
    for lv in &plan.levels {
        let g = lv.gamma;
        let four_g = BigRational::from_integer(BigInt::from(1) << (2 * g));
        let mut binom = BigInt::from(1);
        let mut dist = vec![(BigRational::zero(), BigRational::from_integer(1.into()) - BigRational::from_integer(BigInt::from(1) << g) / &four_g)];
        for i in 0..=g {
            let coeff = &lv.delta.value * BigRational::from_integer((BigInt::from(1) << g) * (g as i64 - 2 * i as i64));
            dist.push((coeff, BigRational::from_integer(binom.clone()) / &four_g));
            binom = binom * (g - i) / (i + 1);
        }
        atoms = atoms
            .into_iter()
            .flat_map(|(vals, w)| {
                dist.iter().map(move |(c, p)| {
                    let mut v = vals.clone();
                    v.push((c.clone(), g));
                    (v, &w * p)
                })
            })
            .collect();
    }
    let mut total = SurdSum::zero();
    for (vals, w) in atoms {
        let mut v = SurdSum::zero();
        for (c, g) in vals {
            v.add_assign(&SurdSum::over_sqrt(c, g));
        }
        total.add_assign(&v.abs().scale(&w));
    }
    let f = total.to_f64();
    (total, f)
}

fn criterion_8() -> Check {
    let plan = relaxed_plan(rat(1, 4));
    let report = membership_report(&plan, 2, 16).map_err(|e| e.to_string())?;
    let integral = report.integral.as_ref().ok_or("no integral")?;
    let (oracle, oracle_f64) = identity_integral_oracle(&plan);
    ensure(integral.exact.as_deref() == Some(oracle.to_string().as_str()), || {
        format!("integral {:?} vs oracle {oracle}", integral.exact)
    })?;
    // ω(t) = t, so each term is δ_a, and δ = (1/4, 1/16)
    ensure(report.bound.bound == rat(5, 16) && report.bound.majorant == rat(5, 16), || {
        format!("bound {} majorant {}", report.bound.bound, report.bound.majorant)
    })?;
    let bound = SurdSum::rational(report.bound.bound.clone());
    ensure(bound.ge(&oracle) && report.bound.majorant < rat(1, 3) && report.holds, || report.summary())?;
    // small plan, where the grid can also be enumerated
    let small = relaxed_plan(rat(1, 32));
    let small_report = membership_report(&small, 2, 16).map_err(|e| e.to_string())?;
    let grid = small_report.grid.as_ref().ok_or("no grid enumeration")?;
    let (small_oracle, _) = identity_integral_oracle(&small);
    ensure(
        small_report.holds && grid.exact.as_deref() == Some(small_oracle.to_string().as_str()),
        || small_report.summary(),
    )?;
    Ok(format!("∫|f_A| = {oracle} ≈ {oracle_f64:.6} ≤ 5/16 ≤ 5/16 < 1/3; grid enumeration agrees on the margin-1/32 plan"))
}

fn criterion_9() -> Check {
    let mut throughput = Vec::new();
    let mut per_butterfly = Vec::new();
    let start = Instant::now();
    for m in 16..=22u32 {
        let f = random_grid(m, DEFAULT_SEED);
        let reps = 1u32 << (22 - m).min(4);
        let t = Instant::now();
        for _ in 0..reps {
            std::hint::black_box(forward_fwht(std::hint::black_box(&f)));
        }
        let secs = t.elapsed().as_secs_f64() / f64::from(reps);
        let butterflies = f64::from(m) * (1u64 << m) as f64 / 2.0;
        per_butterfly.push((m, secs * 1e9 / butterflies));
        throughput.push(Throughput {
            unit: format!("butterflies at M = {m}"),
            per_second: butterflies / secs,
        });
    }
    let mut env = ReportEnvelope::new(
        "acceptance fwht-scaling",
        &RunConfig::default(),
        Status::Info,
        serde_json::json!({ "ns_per_butterfly": per_butterfly }),
    );
    env.timing = Some(Timing {
        wall_seconds: start.elapsed().as_secs_f64(),
        throughput,
    });
    let spread = per_butterfly.iter().map(|p| p.1).fold(0.0, f64::max)
        / per_butterfly.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    println!("{}", serde_json::to_string(&env).expect("envelope serializes"));
    let m20 = per_butterfly.iter().find(|p| p.0 == 20).map_or(0.0, |p| p.1);
    Ok(format!(
        "M = 20: {m20:.2} ns/butterfly; max/min cost per butterfly over M = 16..22 is {spread:.2} (informational)"
    ))
}

fn main() {
    let criteria: [(u32, &str, bool, fn() -> Check); 9] = [
        (1, "block polynomial properties", true, criterion_1),
        (2, "constant-window replay", true, criterion_2),
        (3, "transform correctness", true, criterion_3),
        (4, "convergence identity and domination", true, criterion_4),
        (5, "weak-type measurement", true, criterion_5),
        (6, "strict plan level 1", true, criterion_6),
        (7, "relaxed divergence demo", true, criterion_7),
        (8, "Orlicz membership", true, criterion_8),
        (9, "FWHT performance", false, criterion_9),
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, name, gating, check) in criteria {
        if !filter.is_empty() && !filter.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {n} ({name}): PASS [{secs:.2}s] {detail}"),
            Err(detail) => {
                let tag = if gating { "FAIL" } else { "FAIL (non-gating)" };
                println!("criterion {n} ({name}): {tag} [{secs:.2}s] {detail}");
                if gating {
                    failed += 1;
                }
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
