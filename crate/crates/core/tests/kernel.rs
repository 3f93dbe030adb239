//! Memory kernel against the Gamma distribution and direct quadrature.

use delayline::model::{derive_params, kernel_modulus, kernel_stats, memory_kernel, ChainConfig};
use proptest::prelude::*;
use statrs::distribution::{Continuous, Gamma};

/// Composite Simpson rule, written out here so the check does not lean on
/// library code.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let inner: f64 = (1..m)
        .map(|k| if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h))
        .sum();
    (f(a) + f(b) + inner) * h / 3.0
}

#[test]
fn modulus_is_the_gamma_density() {
    for n in [2usize, 3, 23, 83, 170, 171, 403] {
        let gamma = (n - 1) as f64;
        let dist = Gamma::new(n as f64, gamma).unwrap();
        for k in 1..60 {
            let tau = k as f64 * 0.05;
            let want = dist.pdf(tau);
            let got = kernel_modulus(n, gamma, tau);
            assert!((got - want).abs() <= 1e-10 * want.max(1e-300) + 1e-300, "n={n} tau={tau}: {got} vs {want}");
        }
    }
}

#[test]
fn phase_cycles_with_order() {
    let gamma = 3.0;
    for n in 1..9usize {
        let k = memory_kernel(n, gamma, 0.4).unwrap();
        let unit = k / k.norm();
        let expected = num_complex::Complex64::new(0.0, -1.0).powu(n as u32);
        assert!((unit - expected).norm() < 1e-12, "n = {n}");
    }
}

#[test]
fn no_overflow_at_large_order() {
    let n = 403;
    let gamma = 402.0;
    let peak = kernel_modulus(n, gamma, 1.0);
    assert!(peak.is_finite() && peak > 0.0);
    let stirling = peak * (2.0 * std::f64::consts::PI * n as f64).sqrt() / gamma;
    assert!((stirling - 1.0).abs() < 0.02, "{stirling}");
}

#[test]
fn width_example_n83() {
    let s = kernel_stats(83, 82.0).unwrap();
    assert!((s.peak_location - 1.0).abs() < 1e-15);
    assert!((s.std_dev - 0.1111).abs() < 1e-4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn quadrature_normalization(n in 1usize..500, gamma in 0.2f64..50.0) {
        let upper = 40.0 * n as f64 / gamma;
        let mass = simpson(|t| kernel_modulus(n, gamma, t), 0.0, upper, 200_000);
        prop_assert!((mass - 1.0).abs() < 1e-9, "mass {mass}");
    }

    #[test]
    fn moments_match_stats(n in 2usize..300, gamma in 0.5f64..20.0) {
        let upper = 40.0 * n as f64 / gamma;
        let f = |t: f64| kernel_modulus(n, gamma, t);
        let m1 = simpson(|t| t * f(t), 0.0, upper, 200_000);
        let m2 = simpson(|t| t * t * f(t), 0.0, upper, 200_000);
        let s = kernel_stats(n, gamma).unwrap();
        prop_assert!(((m2 - m1 * m1).sqrt() - s.std_dev).abs() < 1e-7 * s.std_dev.max(1.0));
        // The mode sits one standard unit 1/γ below the mean n/γ.
        prop_assert!((m1 - 1.0 / gamma - s.peak_location).abs() < 1e-7 * m1.max(1.0));
    }

    #[test]
    fn kappa_recovered_from_bonds(m in 0usize..40, kappa in 0.1f64..10.0, dt in 0.1f64..10.0) {
        let p = derive_params(&ChainConfig::new(4 * m + 3, kappa, dt)).unwrap();
        let bonds = p.bonds();
        let first = bonds[0];
        let last = bonds[bonds.len() - 1];
        // Site 0 loses half of each adjacent bond's rate on its side.
        let k = 0.5 * (first.rate + last.rate * last.weight * last.weight);
        prop_assert!((k - kappa).abs() < 1e-12 * kappa.max(1.0));
        prop_assert!((p.eta.re - kappa).abs() < 1e-12 * kappa.max(1.0) && p.eta.im.abs() < 1e-12);
    }
}
