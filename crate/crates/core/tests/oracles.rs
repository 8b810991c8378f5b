//! Values checked against independent oracles: exact big-integer factorials,
//! directly summed series, analytic integrals and brute-force scans.

use balflow::balance::{comparison_bounds, energy, ResidualVector};
use balflow::quadrature::{
    choose_cutoff, compute_i, integral_ratio, integrand_layout, log_f, xf_prime_over_f, QuadError,
    QuadSettings,
};
use balflow::seqspace::{make_reference, CoefficientSequence, TailMode};
use num_bigint::BigUint;
use proptest::prelude::*;

fn reference(n: usize) -> CoefficientSequence {
    make_reference(n).unwrap().into_sequence()
}

fn truncated(values: Vec<f64>) -> CoefficientSequence {
    CoefficientSequence::new(values).unwrap().with_tail(TailMode::Truncated)
}

/// `ln(n!)` from the exact integer: top 64 bits plus a power-of-two shift.
fn ln_factorial_exact(n: u32) -> f64 {
    let f: BigUint = (1..=n).map(BigUint::from).product();
    let shift = f.bits().saturating_sub(64);
    let top = (&f >> shift).to_u64_digits().first().copied().unwrap_or(0);
    (top as f64).ln() + shift as f64 * std::f64::consts::LN_2
}

/// `x^i / i!` for `i = 0..=n` by the ratio recurrence.
fn exp_terms(x: f64, n: usize) -> Vec<f64> {
    let mut terms = vec![1.0];
    for i in 1..=n {
        terms.push(terms[i - 1] * x / i as f64);
    }
    terms
}

#[test]
fn reference_entry_matches_exact_factorial() {
    let r = make_reference(60).unwrap();
    let exact = -ln_factorial_exact(50);
    assert!(((r.values()[50] - exact) / exact).abs() < 1e-10, "{} vs {exact}", r.values()[50]);
    for i in [2u32, 7, 20, 33, 60] {
        let exact = -ln_factorial_exact(i);
        assert!(((r.values()[i as usize] - exact) / exact).abs() < 1e-12);
    }
}

#[test]
fn log_f_of_truncated_exponential() {
    // e^10 minus the tail beyond index 60.
    let lam = reference(60).with_tail(TailMode::Truncated);
    let mut term = (1..=61).map(|j| (10.0 / j as f64).ln()).sum::<f64>().exp();
    let mut tail = 0.0;
    for j in 61..400 {
        tail += term;
        term *= 10.0 / (j + 1) as f64;
    }
    let oracle = 10.0 + (-tail * (-10f64).exp()).ln_1p();
    let got = log_f(&lam, 10.0).unwrap();
    assert!((got - oracle).abs() < 1e-9, "{got} vs {oracle}");
    assert!((log_f(&reference(60), 10.0).unwrap() - 10.0).abs() < 1e-12);
}

#[test]
fn log_f_direct_sums() {
    let sq = truncated(vec![0.0, 2f64.ln(), 0.0]);
    assert!((log_f(&sq, 3.0).unwrap() - 16f64.ln()).abs() < 1e-14);
    let lam = truncated(vec![1.5, -0.3, 2.0, -7.0]);
    assert_eq!(log_f(&lam, 0.0).unwrap(), 1.5);
    assert!(matches!(log_f(&lam, -1.0), Err(QuadError::Domain(_))));
}

#[test]
fn u_of_truncated_exponential() {
    let lam = reference(60).with_tail(TailMode::Truncated);
    let terms = exp_terms(5.0, 60);
    let num: f64 = terms.iter().enumerate().map(|(i, t)| i as f64 * t).sum();
    let den: f64 = terms.iter().sum();
    let got = xf_prime_over_f(&lam, 5.0).unwrap();
    assert!((got - num / den).abs() < 1e-12);
    assert!((got - 5.0).abs() < 1e-8);

    let sq = truncated(vec![0.0, 2f64.ln(), 0.0]);
    assert!((xf_prime_over_f(&sq, 1.0).unwrap() - 1.0).abs() < 1e-14);
    for x in [0.1, 2.0, 30.0] {
        assert!((xf_prime_over_f(&sq, x).unwrap() - 2.0 * x / (1.0 + x)).abs() < 1e-13);
    }
    assert!(xf_prime_over_f(&sq, 1e-12).unwrap() < 1e-11);
}

#[test]
fn reference_integrals() {
    let q = QuadSettings::default();
    let lam = reference(60);
    for i in 0..=20 {
        let est = compute_i(&lam, i, &q).unwrap();
        assert!((est.value - 1.0).abs() < 1e-8, "I_{i} = {}", est.value);
        assert!(est.panels >= 1 && est.cutoff > 0.0);
    }
    // Without the tail the integrals drift above 1; reference values from a
    // 40-digit quadrature of the truncated series.
    let trunc = lam.with_tail(TailMode::Truncated);
    for (i, excess) in [(10, 2.327424813e-10), (14, 1.914031512e-8), (20, 2.877338044e-6)] {
        let est = compute_i(&trunc, i, &q).unwrap();
        assert!((est.value - 1.0 - excess).abs() < 1e-12, "truncated I_{i} = {}", est.value);
    }
}

#[test]
fn square_integral_and_divergence() {
    let q = QuadSettings::default();
    let sq = truncated(vec![0.0, 2f64.ln(), 0.0]);
    assert!((compute_i(&sq, 0, &q).unwrap().value - 1.0).abs() < 1e-9);
    let linear = truncated(vec![0.0, 0.0]);
    assert!(matches!(
        compute_i(&linear, 0, &q),
        Err(QuadError::DivergentIndex { index: 0, order: 1 })
    ));
}

#[test]
fn ratio_integrals_at_reference() {
    let q = QuadSettings::default();
    let lam = reference(80);
    assert!((integral_ratio(&lam, 0.5, &q).unwrap().value - 2.0).abs() < 1e-7);
    assert!((integral_ratio(&lam, 0.9, &q).unwrap().value - 10.0).abs() < 1e-6);
    let i0 = compute_i(&lam, 0, &q).unwrap().value;
    assert_eq!(integral_ratio(&lam, 0.0, &q).unwrap().value, i0);
    assert!(matches!(integral_ratio(&lam, 1.0, &q), Err(QuadError::Domain(_))));
}

#[test]
fn cutoff_against_scan() {
    let q = QuadSettings::default();
    let lam = reference(60);
    // Integrand of I_5 is x^5 e^{-x} / 5!.
    let g = |x: f64| 5.0 * x.ln() - x - 120f64.ln();
    let layout = integrand_layout(&lam, 5, &q).unwrap();
    let scan_peak = (1..100_000)
        .map(|k| k as f64 * 1e-4)
        .max_by(|a, b| g(*a).total_cmp(&g(*b)))
        .unwrap();
    assert!((layout.peak - scan_peak).abs() < 1e-3, "{} vs {scan_peak}", layout.peak);
    assert!(layout.cutoff > 5.0 && layout.cutoff.is_finite());
    assert!(g(layout.cutoff) <= g(scan_peak) - q.cutoff_nats);

    let c0 = choose_cutoff(&lam, 0, &q).unwrap();
    assert!(c0 > 46.0 && c0.is_finite());
    assert_eq!(integrand_layout(&lam, 0, &q).unwrap().peak, 0.0);
    assert!(choose_cutoff(&lam, 58, &q).unwrap().is_finite());
    let trunc = lam.with_tail(TailMode::Truncated);
    assert!(choose_cutoff(&trunc, 58, &q).unwrap().is_finite());
}

#[test]
fn error_estimates_are_honest() {
    let q = QuadSettings::default();
    let fine = q.tightened(2.0);
    let mut values = reference(30).into_values();
    for (i, v) in values.iter_mut().enumerate() {
        *v += 0.3 * (i as f64 * 0.7).sin();
    }
    let lam = CoefficientSequence::new(values).unwrap();
    for i in [0, 1, 4, 10, 20, 28] {
        let a = compute_i(&lam, i, &q).unwrap();
        let b = compute_i(&lam, i, &fine).unwrap();
        assert!((a.value - b.value).abs() <= a.abs_error.max(1e-16), "index {i}: {a:?} {b:?}");
    }
}

fn perturbed(seed_vals: &[f64]) -> CoefficientSequence {
    let r = reference(seed_vals.len() - 1);
    CoefficientSequence::new(r.values().iter().zip(seed_vals).map(|(a, b)| a + b).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn u_is_increasing(
        noise in prop::collection::vec(-0.5f64..0.5, 25),
        x1 in 1e-3f64..50.0,
        dx in 1e-6f64..50.0,
    ) {
        let lam = perturbed(&noise);
        let a = xf_prime_over_f(&lam, x1).unwrap();
        let b = xf_prime_over_f(&lam, x1 + dx).unwrap();
        prop_assert!(b > a, "{a} !< {b}");
    }

    #[test]
    fn constant_shift_leaves_integrals(
        noise in prop::collection::vec(-0.5f64..0.5, 21),
        c in -30.0f64..30.0,
        i in 0usize..=18,
    ) {
        let q = QuadSettings::default();
        let lam = perturbed(&noise);
        let a = compute_i(&lam, i, &q).unwrap();
        let b = compute_i(&lam.shifted(c).unwrap(), i, &q).unwrap();
        prop_assert!((a.value - b.value).abs() <= 10.0 * q.tolerance_for(a.value));
    }

    #[test]
    fn generating_function_consistency(
        noise in prop::collection::vec(-0.3f64..0.3, 31),
        s in 0.0f64..0.95,
    ) {
        let q = QuadSettings::default();
        let lam = perturbed(&noise);
        let order = lam.trunc_order();
        let ints: Vec<f64> = (0..=order - 2).map(|i| compute_i(&lam, i, &q).unwrap().value).collect();
        let series: f64 = ints.iter().rev().fold(0.0, |acc, v| acc * s + v);
        let sup = ints.iter().fold(0.0f64, |m, &v| m.max(v));
        let ratio = integral_ratio(&lam, s, &q).unwrap();
        let allowance = s.powi(order as i32 - 1) * sup / (1.0 - s);
        let slack = 10.0 * q.tolerance_for(ratio.value) * ints.len() as f64;
        prop_assert!(
            (ratio.value - series).abs() <= allowance + slack,
            "s={s}: {} vs {series} (allowance {allowance:e})", ratio.value
        );
    }

    #[test]
    fn comparison_at_fixed_distance(
        noise in prop::collection::vec(-0.5f64..0.5, 25),
        dir in prop::collection::vec(-1.0f64..1.0, 25),
        i in 0usize..=10,
    ) {
        let q = QuadSettings::default();
        let lam = perturbed(&noise);
        let peak = dir.iter().fold(0.0f64, |m, d| m.max(d.abs())).max(1e-12);
        let other = CoefficientSequence::new(
            lam.values().iter().zip(&dir).map(|(v, d)| v + 0.1 * d / peak).collect(),
        ).unwrap();
        let c = comparison_bounds(&lam, &other, i, &q).unwrap();
        prop_assert!((c.distance - 0.1).abs() < 1e-12);
        let tol = 10.0 * q.tolerance_for(c.ratio);
        prop_assert!(c.ratio >= (-0.2f64).exp() - tol && c.ratio <= 0.2f64.exp() + tol);
        prop_assert!(c.fdiff_actual <= c.fdiff_bound + 10.0 * q.tolerance_for(c.fdiff_bound));
    }

    #[test]
    fn energy_norms_nest(
        raw in prop::collection::vec(-2.0f64..2.0, 1..30),
        beta in 0.0f64..0.99,
        s in 0.01f64..=1.0,
    ) {
        let integrals = raw
            .iter()
            .enumerate()
            .map(|(i, f)| f + 1.0 - if i == 0 { beta } else { 0.0 })
            .collect();
        let r = ResidualVector { beta, s: 1.0, abs_errors: vec![0.0; raw.len()], raw, integrals };
        let e = energy(&r, s);
        prop_assert!(e.h_s * e.h_s <= e.e_s * (1.0 + 1e-12));
        prop_assert!(e.e_s <= e.e * (1.0 + 1e-12));
    }
}
