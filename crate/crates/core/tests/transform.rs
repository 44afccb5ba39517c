mod common;

use common::ode_reference;
use proptest::prelude::*;
use quasinorm::nonlinearity::Nonlinearity;
use quasinorm::transform::{check_f_properties, f_inv, f_of, f_prime, log_samples, CheckStatus};

#[test]
fn f_matches_ode_reference() {
    let reference = ode_reference(18, 20_000, 2_000);
    let mut worst = 0.0f64;
    for (t, f_ref) in reference.into_iter().filter(|(t, _)| (0.99e-6..=1.01e6).contains(t)) {
        let rel = (f_of(t) - f_ref).abs() / f_ref;
        worst = worst.max(rel);
    }
    assert!(worst < 1e-8, "max relative error {worst:e}");
}

#[test]
fn property_report_passes_for_sample_nonlinearities() {
    for (r, n) in [(3.0, 3), (4.0, 3), (10.0 / 3.0, 3), (5.0, 2)] {
        let nl = Nonlinearity::power(r, n).unwrap();
        let report = check_f_properties(&log_samples(1e-8, 1e8, 801), &nl);
        assert_eq!(report.checks.len(), 16);
        if nl.g6_holds() {
            assert!(report.all_pass(), "r = {r}, N = {n}\n{}", report.to_table());
        } else {
            assert!(report.checks.iter().all(|c| c.status != CheckStatus::Fail), "r = {r}, N = {n}\n{}", report.to_table());
        }
    }
}

fn magnitude() -> impl Strategy<Value = f64> {
    (-8.0f64..8.0).prop_map(|e| 10f64.powf(e))
}

proptest! {
    #[test]
    fn f_is_odd(t in magnitude()) {
        prop_assert_eq!(f_of(-t), -f_of(t));
    }

    #[test]
    fn f_inverts_closed_form(t in magnitude()) {
        prop_assert!((f_inv(f_of(t)) - t).abs() <= 1e-13 * t);
    }

    #[test]
    fn f_is_monotone(a in magnitude(), b in magnitude()) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(f_of(lo) <= f_of(hi));
    }

    #[test]
    fn f_pointwise_bounds(t in magnitude()) {
        let f = f_of(t);
        let fp = f_prime(t);
        prop_assert!(fp > 0.0 && fp <= 1.0);
        prop_assert!(f <= t);
        prop_assert!(f <= 2f64.powf(0.25) * t.sqrt() * (1.0 + 1e-15));
        prop_assert!(f * fp <= std::f64::consts::FRAC_1_SQRT_2 * (1.0 + 1e-15));
        prop_assert!(0.5 * f <= t * fp * (1.0 + 1e-12) && t * fp <= f * (1.0 + 1e-12));
    }

    #[test]
    fn f_derivative_matches_difference_quotient(t in magnitude()) {
        let h = 1e-5 * t;
        let fd = (f_of(t + h) - f_of(t - h)) / (2.0 * h);
        prop_assert!((fd - f_prime(t)).abs() <= 1e-7 * f_prime(t));
    }
}
