use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use proptest::prelude::*;
use walsh_vp::block::{
    dense_scaled, dense_synthesis, select_ell, BlockPolynomial, DigitSums, ScaledSums, DEFAULT_MAX_DENSE_M,
};
use walsh_vp::diverge::{
    audit_plan, certify_divergence, choose_levels, default_samples, delta, membership_report, PlanMode, PlanOptions,
};
use walsh_vp::dyadic::{binary_digits, dyadic_sum, DyadicPoint};
use walsh_vp::means::{domination_check, maximal_vp, sigma_star, vp_mean, vp_mean_curve};
use walsh_vp::orlicz::OrliczFunction;
use walsh_vp::random::{random_grid, random_rational_grid, random_walsh_polynomial};
use walsh_vp::walsh::{forward_fwht, inverse_fwht, partial_sum, GridFunction};
use walsh_vp::window::WindowSequence;

fn rat(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

fn big(bytes: &[u8]) -> BigUint {
    BigUint::from_bytes_le(bytes)
}

/// `w_k(i / 2^M)` from the Rademacher product: digit `j` of `k` selects
/// `r_j`, and `r_j` reads binary digit `j + 1` of `x`, which is bit
/// `M - 1 - j` of `i`.
fn walsh_oracle(k: u64, i: u64, m: u32) -> i64 {
    let mut sign = 1;
    for j in 0..m {
        if (k >> j) & 1 == 1 && (i >> (m - 1 - j)) & 1 == 1 {
            sign = -sign;
        }
    }
    sign
}

fn window_strategy() -> impl Strategy<Value = WindowSequence> {
    prop_oneof![
        (1u64..40).prop_map(|c| WindowSequence::constant(c).unwrap()),
        (1i64..=8, 1i64..=8)
            .prop_filter("theta <= 1", |(p, q)| p <= q)
            .prop_map(|(p, q)| WindowSequence::proportional(rat(p, q)).unwrap()),
        (1i64..8, 2i64..=8)
            .prop_filter("theta < 1", |(p, q)| p < q)
            .prop_map(|(p, q)| WindowSequence::root(rat(p, q)).unwrap()),
        Just(WindowSequence::log_ratio()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn binary_digits_roundtrip(bytes in proptest::collection::vec(any::<u8>(), 0..24)) {
        let n = big(&bytes);
        let back = binary_digits(&n)
            .iter()
            .enumerate()
            .fold(BigUint::zero(), |acc, (j, &d)| acc + (BigUint::from(d) << j));
        prop_assert_eq!(back, n);
    }

    #[test]
    fn dyadic_sum_is_a_group_law(
        a in proptest::collection::vec(any::<u8>(), 0..16),
        b in proptest::collection::vec(any::<u8>(), 0..16),
        c in proptest::collection::vec(any::<u8>(), 0..16),
    ) {
        let (a, b, c) = (big(&a), big(&b), big(&c));
        prop_assert_eq!(dyadic_sum(&dyadic_sum(&a, &b), &c), dyadic_sum(&a, &dyadic_sum(&b, &c)));
        prop_assert_eq!(dyadic_sum(&a, &b), dyadic_sum(&b, &a));
        prop_assert!(dyadic_sum(&a, &a).is_zero());
        prop_assert_eq!(dyadic_sum(&a, &BigUint::zero()), a);
    }

    #[test]
    fn fwht_matches_rademacher_oracle(m in 0u32..=8, seed in any::<u64>()) {
        let f = random_rational_grid(m, seed);
        let c = forward_fwht(&f);
        let len = 1u64 << m;
        for k in 0..len {
            let mut acc = BigRational::zero();
            for i in 0..len {
                acc += &f.values()[i as usize] * BigRational::from_integer(walsh_oracle(k, i, m).into());
            }
            prop_assert_eq!(&c.coeffs()[k as usize], &(acc / BigRational::from_integer(BigInt::from(len))));
        }
    }

    #[test]
    fn parseval_and_roundtrip_floating(m in 0u32..=12, seed in any::<u64>()) {
        let f = random_grid(m, seed);
        let c = forward_fwht(&f);
        let energy: f64 = c.coeffs().iter().map(|v| v * v).sum();
        let mean_sq: f64 = f.values().iter().map(|v| v * v).sum::<f64>() / f.len() as f64;
        let total: f64 = f.values().iter().map(|v| v * v).sum();
        prop_assert!((energy - mean_sq).abs() <= 1e-12 * total.max(1.0));
        let back = inverse_fwht(&c);
        for (a, b) in back.values().iter().zip(f.values()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        let again = forward_fwht(&inverse_fwht(&c));
        for (a, b) in again.coeffs().iter().zip(c.coeffs()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn parseval_and_roundtrip_exact(m in 0u32..=8, seed in any::<u64>()) {
        let f = random_rational_grid(m, seed);
        let c = forward_fwht(&f);
        let energy = c.coeffs().iter().fold(BigRational::zero(), |a, v| a + v * v);
        let mean_sq = f.values().iter().fold(BigRational::zero(), |a, v| a + v * v)
            / BigRational::from_integer(BigInt::from(f.len()));
        prop_assert_eq!(energy, mean_sq);
        prop_assert_eq!(inverse_fwht(&c), f);
    }

    #[test]
    fn full_partial_sum_reconstructs(m in 0u32..=7, seed in any::<u64>(), cell in any::<u64>()) {
        let f = random_rational_grid(m, seed);
        let cell = cell % (1u64 << m);
        let x = DyadicPoint::cell(cell, m);
        prop_assert_eq!(partial_sum(&f, 1u64 << m, &x).value, f.values()[cell as usize].clone());
    }

    #[test]
    fn partial_sum_is_linear(
        m in 1u32..=6,
        seeds in (any::<u64>(), any::<u64>()),
        alpha in (-9i64..=9, 1i64..=5),
        beta in (-9i64..=9, 1i64..=5),
        n in any::<u64>(),
        cell in any::<u64>(),
    ) {
        let f = random_rational_grid(m, seeds.0);
        let g = random_rational_grid(m, seeds.1);
        let (a, b) = (rat(alpha.0, alpha.1), rat(beta.0, beta.1));
        let h = f.combine(&a, &g, &b).unwrap();
        let n = n % ((1u64 << m) + 1);
        let x = DyadicPoint::cell(cell % (1u64 << m), m);
        let lhs = partial_sum(&h, n, &x).value;
        let rhs = a * partial_sum(&f, n, &x).value + b * partial_sum(&g, n, &x).value;
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn windows_are_valid(w in window_strategy(), start in 1u64..(1 << 16)) {
        let lo = start.min((1 << 16) - 64);
        let mut prev = w.at_u64(lo).unwrap();
        prop_assert!(prev >= 1 && prev <= lo);
        for n in lo + 1..lo + 64 {
            let l = w.at_u64(n).unwrap();
            prop_assert!(1 <= l && l <= n, "lambda_{} = {}", n, l);
            prop_assert!(prev <= l);
            prev = l;
        }
    }

    #[test]
    fn polynomial_reproduced_past_degree(
        m in 1u32..=6,
        degree_bits in 0u32..=6,
        w in window_strategy(),
        seed in any::<u64>(),
    ) {
        let d = 1u64 << degree_bits.min(m);
        let f: GridFunction<BigRational> = random_walsh_polynomial(d, m, seed);
        let n_max = 1u64 << m;
        let curve = vp_mean_curve(&f, &w, n_max, 8).unwrap();
        for (n, row) in curve.rows() {
            if n - curve.lambdas[n as usize] >= d {
                prop_assert_eq!(row, f.values());
            }
        }
    }

    #[test]
    fn curve_matches_pointwise_mean(m in 0u32..=6, w in window_strategy(), seed in any::<u64>(), probe in any::<(u64, u64)>()) {
        let f = random_rational_grid(m, seed);
        let n_max = (1u64 << m) + 2;
        let curve = vp_mean_curve(&f, &w, n_max, 8).unwrap();
        let n = 1 + probe.0 % n_max;
        let cell = probe.1 % (1u64 << m);
        let x = DyadicPoint::cell(cell, m);
        prop_assert_eq!(&curve.row(n)[cell as usize], &vp_mean(&f, &w, n, &x).unwrap().value);
    }

    #[test]
    fn proportional_domination(m in 1u32..=6, theta in (1i64..=4, 1i64..=4), seed in any::<u64>()) {
        prop_assume!(theta.0 <= theta.1);
        let theta = rat(theta.0, theta.1);
        let w = WindowSequence::proportional(theta.clone()).unwrap();
        let f = random_rational_grid(m, seed);
        let n_max = 1u64 << m;
        let report = domination_check(&f, &w, &theta, n_max).unwrap();
        prop_assert!(report.holds, "{:?}", report);
        // the maximal function is at least |V_n| at every n, in particular the last one
        let mx = maximal_vp(&f, &w, n_max).unwrap();
        let ss = sigma_star(&f, n_max);
        for (a, b) in mx.values().iter().zip(ss.values()) {
            prop_assert!(*a >= BigRational::zero() && *b >= BigRational::zero());
        }
    }

    #[test]
    fn block_frequencies_distinct_and_on_lattice(gamma in 1u64..=5, extra in 1u64..=4) {
        let m = 2 * gamma + extra;
        let bp = BlockPolynomial::new(m, gamma).unwrap();
        let freqs = bp.frequencies().unwrap();
        let set: std::collections::BTreeSet<u64> = freqs.iter().copied().collect();
        prop_assert_eq!(set.len() as u64, gamma << gamma);
        let b = 1u64 << (m - 2 * gamma);
        prop_assert!(freqs.iter().all(|&mu| mu % b == 0 && mu >= b && mu < 1 << m));
    }

    #[test]
    fn block_dense_forms_agree(gamma in 1u64..=4, extra in 1u64..=4) {
        let bp = BlockPolynomial::new(2 * gamma + extra, gamma).unwrap();
        prop_assert_eq!(
            dense_scaled(&bp, DEFAULT_MAX_DENSE_M).unwrap(),
            dense_synthesis(&bp, DEFAULT_MAX_DENSE_M).unwrap()
        );
    }

    #[test]
    fn block_partial_sums_constant_on_blocks(gamma in 1u64..=4, extra in 1u64..=3, cell in any::<u64>(), q in any::<u64>()) {
        let m = 2 * gamma + extra;
        let bp = BlockPolynomial::new(m, gamma).unwrap();
        let x = DyadicPoint::cell(cell % (1 << m), m as u32);
        let sums = DigitSums::new(&bp, &x);
        let b = 1u64 << extra;
        let q = 1 + q % (1 << (2 * gamma));
        let at_block = sums.count(&BigUint::from(q * b));
        for k in (q - 1) * b + 1..=q * b {
            prop_assert_eq!(&sums.count(&BigUint::from(k)), &at_block);
        }
    }

    #[test]
    fn ell_difference_is_signed_j_count(gamma in 1u64..=8, extra in 1u64..=6, bits in any::<u64>()) {
        let m = 2 * gamma + extra;
        let x = DyadicPoint::cell(bits % (1 << m), m as u32);
        let bp = BlockPolynomial::new(m, gamma).unwrap();
        let w = select_ell(&bp, &x).unwrap();
        let diff = &w.s_ell2.q - &w.s_ell1.q;
        prop_assert_eq!(diff.abs(), BigInt::from(w.j_set.len()));
        prop_assert!(2 * w.j_set.len() as u64 >= gamma);
        prop_assert!(w.s_ell().meets_quarter());
        prop_assert!(w.check().is_ok());
    }

    #[test]
    fn delta_nonincreasing_in_level(a in 1u64..=20, q in 1u64..=200, beta in 1i64..=4) {
        for omega in [OrliczFunction::identity(), OrliczFunction::log_power(rat(beta, 10)).unwrap()] {
            let d0 = delta(a, q, &omega).value;
            let d1 = delta(a + 1, q, &omega).value;
            prop_assert!(d1 <= d0);
            prop_assert!(d0 <= BigRational::new(BigInt::one(), BigInt::one() << a));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn relaxed_plans_are_sound(margin in (1i64..=4, 4i64..=64), root in prop_oneof![Just(rat(1, 2)), Just(rat(1, 3)), Just(rat(2, 3))]) {
        let mode = PlanMode::Relaxed { margin: rat(margin.0, margin.1) };
        let w = WindowSequence::root(root).unwrap();
        let plan = choose_levels(&OrliczFunction::identity(), &w, &mode, 2, PlanOptions::default()).unwrap();
        let audit = audit_plan(&plan).unwrap();
        prop_assert!(audit.iter().all(|l| l.holds()));
        let levels = plan.numeric_levels();
        let report = membership_report(&plan, levels, 16).unwrap();
        prop_assert!(report.holds, "{}", report.summary());
    }

    #[test]
    fn certificates_agree_with_brute_force(seed in any::<u64>()) {
        let mode = PlanMode::Relaxed { margin: rat(1, 4) };
        let w = WindowSequence::root(rat(1, 2)).unwrap();
        let plan = choose_levels(&OrliczFunction::identity(), &w, &mode, 2, PlanOptions::default()).unwrap();
        let (spec, points) = default_samples(&plan, 2, 8, seed).unwrap();
        let cert = certify_divergence(&plan, 2, spec, &points).unwrap();
        for p in &cert.points {
            for l in &p.levels {
                prop_assert!(l.brute_force_equal && l.iii_zero && l.meets_target, "{:?}", l);
            }
        }
        prop_assert!(cert.summary.all_pass);
        prop_assert_eq!(plan.levels[1].m.to_u64(), Some(749));
    }
}
