//! Bond channels, their factorization and the fourth-order split.

use delayline::linalg::{self, CMatrix};
use delayline::model::Bond;
use delayline::superop::{
    bond_generator, exponentiate, factorize_channel, log_log_slope, make_schedule, min_choi_eigenvalue,
    trace_preservation_error, trotter_step_error, trotter_test_ring, vectorize_lindbladian, BondClass,
    BondGenerator, ChannelKind,
};
use ndarray::Array2;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bond(rate: f64, weight: f64) -> Bond {
    Bond {
        index: 0,
        left: 0,
        right: 1,
        rate,
        weight,
    }
}

/// Master-equation right-hand side written directly in matrix form.
fn lindblad_rhs(g: &BondGenerator, rho: &CMatrix) -> CMatrix {
    let i = C64::new(0.0, 1.0);
    let j = &g.jump;
    let jd = linalg::dagger(&j.view());
    let jdj = jd.dot(j);
    let comm = g.h.dot(rho) - rho.dot(&g.h);
    comm * (-i) + j.dot(rho).dot(&jd) - (jdj.dot(rho) + rho.dot(&jdj)) * C64::from(0.5)
}

/// Many small RK4 steps of the bond master equation.
fn integrate(g: &BondGenerator, rho: &CMatrix, t: f64, steps: usize) -> CMatrix {
    let h = t / steps as f64;
    let mut x = rho.clone();
    for _ in 0..steps {
        let k1 = lindblad_rhs(g, &x);
        let k2 = lindblad_rhs(g, &(&x + &(&k1 * C64::from(h / 2.0))));
        let k3 = lindblad_rhs(g, &(&x + &(&k2 * C64::from(h / 2.0))));
        let k4 = lindblad_rhs(g, &(&x + &(&k3 * C64::from(h))));
        x = x + (k1 + k2 * C64::from(2.0) + k3 * C64::from(2.0) + k4) * C64::from(h / 6.0);
    }
    x
}

fn random_density(rng: &mut ChaCha8Rng) -> CMatrix {
    let a = Array2::from_shape_fn((4, 4), |_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let rho = linalg::dagger(&a.view()).dot(&a);
    let tr = linalg::trace(&rho.view());
    rho / tr
}

#[test]
fn channel_matches_direct_integration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let g = bond_generator(bond(22.0, 0.3), 0.5 * std::f64::consts::PI, 0.0);
    let l = vectorize_lindbladian(&g);
    for dt in [2e-3, 1e-2, 0.05] {
        let step = factorize_channel(&exponentiate(&l, dt).unwrap(), ChannelKind::Cptp, dt).unwrap();
        let rho = random_density(&mut rng);
        let want = integrate(&g, &rho, dt, 2000);
        let got = step.apply(&rho);
        assert!(linalg::frobenius(&(got - want).view()) < 1e-10);
    }
}

#[test]
fn backward_step_inverts_forward_step() {
    let g = bond_generator(bond(5.0, 1.0), 0.0, 1.0);
    let l = vectorize_lindbladian(&g);
    let fwd = factorize_channel(&exponentiate(&l, 0.01).unwrap(), ChannelKind::Cptp, 0.01).unwrap();
    let bwd = factorize_channel(&exponentiate(&l, -0.01).unwrap(), ChannelKind::LinearTp, -0.01).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rho = random_density(&mut rng);
    let back = bwd.apply(&fwd.apply(&rho));
    assert!(linalg::frobenius(&(back - &rho).view()) < 1e-11);
}

#[test]
fn kraus_request_on_backward_step_is_refused() {
    let g = bond_generator(bond(5.0, 1.0), 0.0, 0.0);
    let e = exponentiate(&vectorize_lindbladian(&g), -0.01).unwrap();
    assert!(factorize_channel(&e, ChannelKind::Cptp, -0.01).is_err());
}

#[test]
fn split_is_fourth_order_on_three_and_four_sites() {
    let dts = [4e-3, 2e-3, 1e-3, 5e-4];
    let three = trotter_test_ring(20.0);
    let four: Vec<Bond> = (0..4)
        .map(|j| Bond {
            index: j,
            left: j,
            right: (j + 1) % 4,
            rate: 25.0,
            weight: if j == 3 { 0.4 } else { 1.0 },
        })
        .collect();
    for ring in [three, four] {
        let errors: Vec<f64> = dts
            .iter()
            .map(|&dt| trotter_step_error(&ring, std::f64::consts::PI, dt).unwrap())
            .collect();
        let slope = log_log_slope(&dts, &errors);
        assert!((slope - 5.0).abs() < 0.3, "{} sites: slope {slope}, {errors:?}", ring.len());
    }
}

#[test]
fn every_class_advances_by_the_full_step() {
    let s = make_schedule(1e-3).unwrap();
    for n in [2usize, 3, 6, 7] {
        let ops = s.operations(n, 5);
        let classes: &[BondClass] = if n % 2 == 0 {
            &[BondClass::Even, BondClass::Odd, BondClass::Remainder]
        } else {
            &[BondClass::Even, BondClass::Odd]
        };
        for &c in classes {
            let total: f64 = ops.iter().filter(|o| o.0 == c).map(|o| o.1).sum();
            assert!((total - 5e-3).abs() < 1e-15, "n={n} {c:?}: {total}");
        }
        assert!(ops.windows(2).all(|w| w[0].0 != w[1].0), "neighbours merged");
        let reversed: Vec<_> = ops.iter().rev().copied().collect();
        for (a, b) in ops.iter().zip(&reversed) {
            assert_eq!(a.0, b.0);
            assert!((a.1 - b.1).abs() < 1e-16);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn factorization_invariants(
        rate in 0.5f64..60.0,
        weight in 0.05f64..1.0,
        dl in 0.0f64..3.0,
        dr in 0.0f64..3.0,
        mag in 1e-3f64..0.03,
        backward in any::<bool>(),
    ) {
        let dt = if backward { -mag } else { mag };
        let g = bond_generator(bond(rate, weight), dl, dr);
        let e = exponentiate(&vectorize_lindbladian(&g), dt).unwrap();
        prop_assert!(trace_preservation_error(&e) < 1e-9);
        let step = factorize_channel(&e, ChannelKind::for_substep(dt), dt).unwrap();
        let recon = linalg::frobenius(&(step.superoperator() - &e).view());
        prop_assert!(recon < 1e-10, "reconstruction {recon}");
        prop_assert!(step.completeness_error() < 1e-10);
        let min = min_choi_eigenvalue(&e).unwrap();
        if backward {
            prop_assert!(min < -1e-8, "min Choi eigenvalue {min}");
        } else {
            prop_assert!(min > -1e-10);
            for (a, b) in &step.pairs {
                prop_assert_eq!(a, b);
            }
        }
    }
}
