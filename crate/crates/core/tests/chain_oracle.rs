//! The classical chain of damped oscillators as a delay line.

use delayline::dde::{chain_impulse_response, classical_chain_oracle};
use delayline::model::kernel_modulus;

#[test]
fn impulse_response_is_the_kernel() {
    for n in [2usize, 5, 23] {
        let gamma = (n - 1) as f64;
        let ts = chain_impulse_response(n, 1.0, 3.0).unwrap();
        for (t, v) in ts.times.iter().zip(&ts.values).skip(1) {
            let k = kernel_modulus(n, gamma, *t);
            assert!((v - k).abs() < 1e-7 * (1.0 + k), "n={n} t={t}: {v} vs {k}");
        }
    }
}

#[test]
fn delayed_sine_error_shrinks_with_length() {
    let drive = |t: f64| (2.0 * std::f64::consts::PI * t / 5.0).sin();
    let errors: Vec<f64> = [11usize, 41, 161]
        .iter()
        .map(|&n| classical_chain_oracle(n, 1.0, &drive, 12.0).unwrap().sup_error)
        .collect();
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    // A Gamma kernel of mean Δt + Δt/(n-1) shifts the signal by that much,
    // so the error falls like 1/n.
    let ratio = errors[0] / errors[2];
    assert!(ratio > 8.0 && ratio < 24.0, "{ratio}");
}

#[test]
fn step_drive_arrives_after_one_delay() {
    let res = classical_chain_oracle(201, 1.0, &|t| if t >= 0.0 { 1.0 } else { 0.0 }, 3.0).unwrap();
    let half = res.x_n.first_crossing(0.5, 0.0).unwrap();
    assert!((half - 1.0).abs() < 0.02, "{half}");
    assert!(res.x_n.interpolate(0.5).unwrap() < 1e-6);
}
