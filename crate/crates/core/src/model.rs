//! Chain parameters, the engineered-parameter map, and the closed-form
//! memory kernel of the auxiliary ring.
//!
//! The ring has `n + 1` sites. Site 0 is the system of interest; sites
//! `1..=n` are damped auxiliary oscillators. Bond `j` couples site `j` to
//! site `j + 1 (mod n + 1)` nonreciprocally, so signals only travel
//! `0 → 1 → … → n → 0`.

use num_complex::Complex64 as C64;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// User-facing chain configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainConfig {
    /// Number of auxiliary oscillators.
    pub n: usize,
    /// Amplitude decay rate of site 0.
    pub kappa: f64,
    /// Target delay time.
    pub delta_t: f64,
    /// Coherent drive strength on site 0.
    pub omega: f64,
    /// Requested feedback strength in units of `kappa` (η / κ).
    pub feedback_ratio: f64,
}

impl ChainConfig {
    pub fn new(n: usize, kappa: f64, delta_t: f64) -> Self {
        Self {
            n,
            kappa,
            delta_t,
            omega: 0.0,
            feedback_ratio: 1.0,
        }
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    pub fn with_feedback_ratio(mut self, ratio: f64) -> Self {
        self.feedback_ratio = ratio;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!(
                "n = {} but the ring needs at least two auxiliary sites",
                self.n
            )));
        }
        if !(self.delta_t.is_finite() && self.delta_t > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "delta_t = {} must be finite and > 0",
                self.delta_t
            )));
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kappa = {} must be finite and > 0",
                self.kappa
            )));
        }
        let kdt = self.kappa * self.delta_t;
        if !(kdt.is_finite() && kdt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kappa * delta_t = {kdt} must be finite and > 0"
            )));
        }
        if !(self.omega.is_finite() && self.omega >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "omega = {} must be finite and >= 0",
                self.omega
            )));
        }
        if !(self.feedback_ratio.is_finite() && (0.0..=1.0).contains(&self.feedback_ratio)) {
            return Err(Error::InvalidParameter(format!(
                "feedback_ratio = {} must lie in [0, 1] for real bond weights",
                self.feedback_ratio
            )));
        }
        Ok(())
    }
}

/// Engineered parameters of the auxiliary ring.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivedParams {
    pub n: usize,
    /// Local damping of every auxiliary oscillator.
    pub gamma: f64,
    /// Weight of the bond 0 → 1.
    pub chi_01: f64,
    /// Weight of the bond n → 0.
    pub chi_n0: f64,
    /// Feedback amplitude, `(-i)^(n+1) γ χ_n0 / χ_01`.
    pub eta: C64,
    pub kappa: f64,
}

/// One nonreciprocal bond `left → right` with decay rate `rate` and real
/// weight `weight`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bond {
    pub index: usize,
    pub left: usize,
    pub right: usize,
    pub rate: f64,
    pub weight: f64,
}

impl DerivedParams {
    /// Rate of the bond 0 → 1, `γ / χ_01²`.
    pub fn gamma_01(&self) -> f64 {
        if self.chi_01 == 0.0 {
            0.0
        } else {
            self.gamma / (self.chi_01 * self.chi_01)
        }
    }

    /// Rate of the bond n → 0.
    pub fn gamma_n0(&self) -> f64 {
        self.gamma
    }

    /// Decay rate of site 0 recomputed from the bond parameters,
    /// `(χ_n0² + 1/χ_01²) γ / 2`.
    pub fn kappa_from_bonds(&self) -> f64 {
        0.5 * (self.chi_n0 * self.chi_n0 * self.gamma_n0() + self.gamma_01())
    }

    pub fn num_sites(&self) -> usize {
        self.n + 1
    }

    /// Bond `j` of the ring, `j` in `0..=n`.
    pub fn bond(&self, j: usize) -> Result<Bond> {
        let n = self.n;
        if j > n {
            return Err(Error::InvalidParameter(format!(
                "bond index {j} out of range 0..={n}"
            )));
        }
        let (rate, weight) = if j == 0 {
            (self.gamma_01(), self.chi_01)
        } else if j == n {
            (self.gamma_n0(), self.chi_n0)
        } else {
            (self.gamma, 1.0)
        };
        Ok(Bond {
            index: j,
            left: j,
            right: (j + 1) % (n + 1),
            rate,
            weight,
        })
    }

    pub fn bonds(&self) -> Vec<Bond> {
        (0..=self.n).map(|j| self.bond(j).expect("in range")).collect()
    }
}

/// `(-i)^k`.
pub fn minus_i_pow(k: usize) -> C64 {
    match k % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, -1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, 1.0),
    }
}

fn phase_name(k: usize) -> &'static str {
    match k % 4 {
        0 => "1",
        1 => "-i",
        2 => "-1",
        _ => "i",
    }
}

/// Map `(n, κ, Δt, η/κ)` onto the ring parameters `(γ, χ_01, χ_n0)`.
///
/// With `γ = (n-1)/Δt`, the bond weights solve
/// `κ = (χ_n0² + 1/χ_01²) γ / 2` and `|η| = γ χ_n0 / χ_01 = r κ`.
/// For `r = 1` this is `χ_n0 = √(κ/γ)`, `χ_01 = √(γ/κ)`. For `r < 1` the
/// smaller root goes to the return bond `n → 0`, so `r = 0` switches the
/// feedback off entirely.
pub fn derive_params(cfg: &ChainConfig) -> Result<DerivedParams> {
    cfg.validate()?;
    let n = cfg.n;
    let r = cfg.feedback_ratio;
    if r > 0.0 && n % 4 != 3 {
        return Err(Error::FeedbackPhase {
            exponent: n + 1,
            phase: phase_name(n + 1),
        });
    }
    let gamma = (n as f64 - 1.0) / cfg.delta_t;
    let scale = cfg.kappa / gamma;
    let root = (1.0 - r * r).max(0.0).sqrt();
    let chi_n0 = (scale * (1.0 - root)).sqrt();
    let chi_01 = 1.0 / (scale * (1.0 + root)).sqrt();
    let eta = minus_i_pow(n + 1) * (gamma * chi_n0 / chi_01);
    Ok(DerivedParams {
        n,
        gamma,
        chi_01,
        chi_n0,
        eta,
        kappa: cfg.kappa,
    })
}

/// Memory kernel `K_n(τ) = (-iγ)^n τ^(n-1) e^(-γτ) / (n-1)!`.
///
/// Evaluated in log space so that large `n` neither overflows the factorial
/// nor underflows the power.
pub fn memory_kernel(n: usize, gamma: f64, tau: f64) -> Result<C64> {
    if n == 0 {
        return Err(Error::InvalidParameter("kernel order n must be >= 1".into()));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("gamma = {gamma} must be > 0")));
    }
    if !(tau >= 0.0) {
        return Err(Error::InvalidParameter(format!("tau = {tau} must be >= 0")));
    }
    Ok(minus_i_pow(n) * kernel_modulus(n, gamma, tau))
}

/// `|K_n(τ)|`, the Gamma(shape n, rate γ) density.
pub fn kernel_modulus(n: usize, gamma: f64, tau: f64) -> f64 {
    if tau == 0.0 {
        return if n == 1 { gamma } else { 0.0 };
    }
    let nf = n as f64;
    let log_mod = nf * gamma.ln() + (nf - 1.0) * tau.ln() - gamma * tau - ln_gamma(nf);
    log_mod.exp()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelStats {
    pub peak_location: f64,
    pub std_dev: f64,
}

/// Mode and standard deviation of `|K_n|`.
pub fn kernel_stats(n: usize, gamma: f64) -> Result<KernelStats> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "kernel_stats needs n >= 2, got {n}"
        )));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("gamma = {gamma} must be > 0")));
    }
    Ok(KernelStats {
        peak_location: (n as f64 - 1.0) / gamma,
        std_dev: (n as f64).sqrt() / gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn derive_n83() {
        let p = derive_params(&ChainConfig::new(83, 1.0, 1.0)).unwrap();
        assert_relative_eq!(p.gamma, 82.0);
        assert_relative_eq!(p.chi_01, 82f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(p.chi_n0, 1.0 / 82f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(p.eta.re, 1.0, max_relative = 1e-14);
        assert!(p.eta.im.abs() < 1e-15);
        assert_relative_eq!(p.kappa_from_bonds(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn derive_smallest_ring() {
        let p = derive_params(&ChainConfig::new(3, 1.0, 1.0)).unwrap();
        assert_eq!(p.gamma, 2.0);
        assert_relative_eq!(p.eta.re, 1.0, max_relative = 1e-14);
        assert_eq!(p.eta.im, 0.0);
    }

    #[test]
    fn derive_rejects_wrong_phase() {
        let err = derive_params(&ChainConfig::new(84, 1.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::FeedbackPhase { exponent: 85, phase: "-i" }));
    }

    #[test]
    fn derive_rejects_bad_delay() {
        assert!(derive_params(&ChainConfig::new(83, 1.0, 0.0)).is_err());
        assert!(derive_params(&ChainConfig::new(83, 1.0, -1.0)).is_err());
        assert!(derive_params(&ChainConfig::new(83, 1.0, f64::NAN)).is_err());
    }

    #[test]
    fn derive_without_feedback_accepts_any_n() {
        let p = derive_params(&ChainConfig::new(84, 1.0, 1.0).with_feedback_ratio(0.0)).unwrap();
        assert_eq!(p.chi_n0, 0.0);
        assert_eq!(p.eta, C64::new(0.0, 0.0));
        assert_relative_eq!(p.kappa_from_bonds(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn ratio_above_one_rejected() {
        assert!(derive_params(&ChainConfig::new(83, 1.0, 1.0).with_feedback_ratio(1.5)).is_err());
    }

    #[test]
    fn bond_table() {
        let p = derive_params(&ChainConfig::new(7, 1.0, 1.0)).unwrap();
        let bonds = p.bonds();
        assert_eq!(bonds.len(), 8);
        assert_eq!((bonds[0].left, bonds[0].right), (0, 1));
        assert_relative_eq!(bonds[0].rate, 1.0, max_relative = 1e-14);
        assert_eq!((bonds[3].rate, bonds[3].weight), (6.0, 1.0));
        assert_eq!((bonds[7].left, bonds[7].right), (7, 0));
        assert_eq!(bonds[7].rate, 6.0);
        assert!(p.bond(8).is_err());
    }

    #[test]
    fn kernel_first_order_at_origin() {
        let k = memory_kernel(1, 2.0, 0.0).unwrap();
        assert_eq!(k, C64::new(0.0, -2.0));
    }

    #[test]
    fn kernel_rejects_negative_tau() {
        assert!(memory_kernel(3, 2.0, -0.1).is_err());
    }

    #[test]
    fn kernel_large_order_stirling() {
        // At the mode, Stirling gives |K_n| ≈ γ / √(2π n).
        let n = 403;
        let gamma = 402.0;
        let peak = kernel_stats(n, gamma).unwrap().peak_location;
        let k = memory_kernel(n, gamma, peak).unwrap().norm();
        assert!(k.is_finite());
        let stirling = k * (2.0 * std::f64::consts::PI * n as f64).sqrt() / gamma;
        assert!((stirling - 1.0).abs() < 0.02, "{stirling}");
    }

    #[test]
    fn kernel_stats_examples() {
        let s = kernel_stats(83, 82.0).unwrap();
        assert_relative_eq!(s.peak_location, 1.0);
        assert!((s.std_dev - 0.1111).abs() < 1e-4);
        let s = kernel_stats(2, 1.0).unwrap();
        assert_eq!(s.peak_location, 1.0);
        assert_relative_eq!(s.std_dev, 2f64.sqrt());
        assert!(kernel_stats(1, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn kappa_round_trip(m in 0usize..60, kappa in 0.05f64..20.0, dt in 0.05f64..20.0, r in 0.0f64..=1.0) {
            let n = 4 * m + 3;
            let p = derive_params(&ChainConfig::new(n, kappa, dt).with_feedback_ratio(r)).unwrap();
            prop_assert!((p.kappa_from_bonds() - kappa).abs() <= 1e-12 * kappa.max(1.0));
            prop_assert!((p.eta.norm() - r * kappa).abs() <= 1e-12 * kappa.max(1.0));
            prop_assert!((p.eta.norm() - p.gamma * p.chi_n0 / p.chi_01).abs() <= 1e-12 * kappa.max(1.0));
            prop_assert!(p.eta.im.abs() <= 1e-15 && p.eta.re >= 0.0);
            prop_assert!((p.gamma - (n as f64 - 1.0) / dt).abs() <= 1e-12 * p.gamma);
        }

        #[test]
        fn std_scaling_identity(n in 2usize..2000, gamma in 0.01f64..1e4) {
            let s = kernel_stats(n, gamma).unwrap();
            prop_assert!((s.std_dev * gamma / (n as f64).sqrt() - 1.0).abs() < 1e-14);
        }
    }
}
