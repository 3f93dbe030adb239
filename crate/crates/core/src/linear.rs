//! Exact dynamics of the fully linear (bosonic) ring.
//!
//! For a linear site 0 the amplitudes obey `d a/dt = M a + noise`. Starting
//! from the vacuum for the baths and auxiliary sites, normally ordered
//! moments do not see the noise, so the second moments
//! `c[j][k] = ⟨a_j† a_k⟩` evolve as `dc/dt = M̄ c + c Mᵀ`, i.e.
//! `c(t) = conj(U) c0 Uᵀ` with `U = e^{M t}`.
//!
//! States are kept in factored form `c = Σ_k w_k conj(ψ_k) ψ_kᵀ`, which
//! is exact for any Hermitian PSD `c0` and keeps a long trajectory of a
//! 404-site ring in memory.

use std::collections::HashMap;

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, Inverse, SVD};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::model::{Bond, DerivedParams};
use crate::series::TimeSeries;

/// Above this eigenvector condition number the propagator falls back to the
/// matrix exponential.
pub const MAX_EIGVEC_CONDITION: f64 = 1e8;

/// Linear generator of the ring amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftMatrix {
    m: CMatrix,
}

impl DriftMatrix {
    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn eigenvalues(&self) -> Result<Array1<C64>> {
        Ok(self.m.eig()?.0)
    }
}

/// Drift matrix of the engineered ring.
pub fn build_drift(p: &DerivedParams) -> DriftMatrix {
    build_drift_from_bonds(p.num_sites(), &p.bonds())
}

/// Each bond `l → r` with rate `γ_b` and weight `χ_b` damps site `l` by
/// `γ_b/2`, site `r` by `γ_b χ_b²/2`, and drives `r` from `l` with
/// `-i γ_b χ_b`.
pub fn build_drift_from_bonds(num_sites: usize, bonds: &[Bond]) -> DriftMatrix {
    let mut m = Array2::<C64>::zeros((num_sites, num_sites));
    for b in bonds {
        m[[b.left, b.left]] -= C64::from(0.5 * b.rate);
        m[[b.right, b.right]] -= C64::from(0.5 * b.rate * b.weight * b.weight);
        m[[b.right, b.left]] += C64::new(0.0, -b.rate * b.weight);
    }
    DriftMatrix { m }
}

#[derive(Clone, Debug, PartialEq)]
enum Repr {
    Dense(CMatrix),
    /// `c = Σ_k w_k conj(ψ_k) ψ_kᵀ`.
    Modes { weights: Vec<f64>, amps: Vec<CVector> },
}

/// Normally ordered second moments `c[j][k] = ⟨a_j† a_k⟩` at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceState {
    t: f64,
    dim: usize,
    repr: Repr,
}

impl CovarianceState {
    /// One excitation on `site`, vacuum elsewhere.
    pub fn single_excitation(num_sites: usize, site: usize) -> Self {
        let mut psi = Array1::zeros(num_sites);
        psi[site] = C64::from(1.0);
        Self::pure(0.0, psi)
    }

    /// The one-excitation state with amplitudes `psi`.
    pub fn pure(t: f64, psi: CVector) -> Self {
        Self {
            t,
            dim: psi.len(),
            repr: Repr::Modes {
                weights: vec![1.0],
                amps: vec![psi],
            },
        }
    }

    pub fn from_matrix(t: f64, c: CMatrix) -> Result<Self> {
        if c.nrows() != c.ncols() {
            return Err(Error::InvalidState("covariance matrix must be square".into()));
        }
        let herm = linalg::hermiticity_error(&c.view());
        if herm > 1e-10 {
            return Err(Error::InvalidState(format!(
                "covariance matrix is not Hermitian (deviation {herm:e})"
            )));
        }
        let (w, _) = linalg::eigh(&c)?;
        let min = w.iter().cloned().fold(f64::INFINITY, f64::min);
        let scale = w.iter().map(|x| x.abs()).fold(1.0, f64::max);
        if min < -1e-10 * scale {
            return Err(Error::InvalidState(format!(
                "covariance matrix is not positive semidefinite (eigenvalue {min:e})"
            )));
        }
        Ok(Self {
            t,
            dim: c.nrows(),
            repr: Repr::Dense(c),
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, j: usize, k: usize) -> C64 {
        match &self.repr {
            Repr::Dense(c) => c[[j, k]],
            Repr::Modes { weights, amps } => weights
                .iter()
                .zip(amps)
                .map(|(&w, psi)| psi[j].conj() * psi[k] * w)
                .sum(),
        }
    }

    /// `⟨a_j† a_j⟩`.
    pub fn population(&self, j: usize) -> f64 {
        self.entry(j, j).re
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim).map(|j| self.population(j)).collect()
    }

    pub fn total_excitation(&self) -> f64 {
        self.populations().iter().sum()
    }

    pub fn to_matrix(&self) -> CMatrix {
        match &self.repr {
            Repr::Dense(c) => c.clone(),
            Repr::Modes { .. } => {
                Array2::from_shape_fn((self.dim, self.dim), |(j, k)| self.entry(j, k))
            }
        }
    }

    /// Weighted amplitude vectors whose outer products sum to `c`.
    fn modes(&self) -> Result<(Vec<f64>, Vec<CVector>)> {
        match &self.repr {
            Repr::Modes { weights, amps } => Ok((weights.clone(), amps.clone())),
            Repr::Dense(c) => {
                let (w, v) = linalg::eigh(c)?;
                let scale = w.iter().map(|x| x.abs()).fold(0.0, f64::max);
                let mut weights = Vec::new();
                let mut amps = Vec::new();
                for (k, &lam) in w.iter().enumerate() {
                    if lam > 1e-14 * scale {
                        weights.push(lam);
                        // c = Σ λ v v†, and v v† = conj(ψ) ψᵀ for ψ = conj(v).
                        amps.push(v.column(k).mapv(|z| z.conj()));
                    }
                }
                Ok((weights, amps))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PropagationMethod {
    /// `U(t) = V e^{Λt} V⁻¹`.
    Eigen,
    /// Scaling-and-squaring exponential of each sampling interval.
    Expm,
}

enum Kind {
    Eigen {
        values: Array1<C64>,
        vectors: CMatrix,
        inverse: CMatrix,
    },
    Expm,
}

/// Amplitude propagator `ψ(t) = e^{M t} ψ(0)`.
pub struct Propagator {
    m: CMatrix,
    kind: Kind,
    condition: f64,
}

impl Propagator {
    /// Uses the eigendecomposition unless its eigenvector matrix is too
    /// ill-conditioned.
    pub fn new(drift: &DriftMatrix) -> Result<Self> {
        let m = drift.matrix().clone();
        let (values, vectors) = m.eig()?;
        let (_, sv, _) = vectors.svd(false, false)?;
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if condition <= MAX_EIGVEC_CONDITION {
            if let Ok(inverse) = vectors.inv() {
                return Ok(Self {
                    m,
                    kind: Kind::Eigen {
                        values,
                        vectors,
                        inverse,
                    },
                    condition,
                });
            }
        }
        Ok(Self {
            m,
            kind: Kind::Expm,
            condition,
        })
    }

    /// Always integrates with the matrix exponential.
    pub fn expm_only(drift: &DriftMatrix) -> Self {
        Self {
            m: drift.matrix().clone(),
            kind: Kind::Expm,
            condition: f64::NAN,
        }
    }

    pub fn method(&self) -> PropagationMethod {
        match self.kind {
            Kind::Eigen { .. } => PropagationMethod::Eigen,
            Kind::Expm => PropagationMethod::Expm,
        }
    }

    /// Eigenvector condition number of the drift matrix (NaN if not computed).
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn propagate(
        &self,
        c0: &CovarianceState,
        sample_times: &[f64],
    ) -> Result<Vec<CovarianceState>> {
        if c0.dim() != self.m.nrows() {
            return Err(Error::InvalidParameter(format!(
                "state has {} sites but drift matrix has {}",
                c0.dim(),
                self.m.nrows()
            )));
        }
        if sample_times.windows(2).any(|w| !(w[1] > w[0]))
            || sample_times.first().is_some_and(|&t| t < c0.time())
        {
            return Err(Error::InvalidParameter(
                "sample times must increase from the initial time".into(),
            ));
        }
        let (weights, amps) = c0.modes()?;
        let evolved: Vec<Vec<CVector>> = match &self.kind {
            Kind::Eigen {
                values,
                vectors,
                inverse,
            } => {
                let coeffs: Vec<CVector> = amps.iter().map(|psi| inverse.dot(psi)).collect();
                sample_times
                    .iter()
                    .map(|&t| {
                        let phase = values.mapv(|l| (l * (t - c0.time())).exp());
                        coeffs.iter().map(|c| vectors.dot(&(c * &phase))).collect()
                    })
                    .collect()
            }
            Kind::Expm => {
                let mut cache: HashMap<u64, CMatrix> = HashMap::new();
                let mut current = amps.clone();
                let mut t_prev = c0.time();
                let mut out = Vec::with_capacity(sample_times.len());
                for &t in sample_times {
                    let h = t - t_prev;
                    if h > 0.0 {
                        let key = h.to_bits();
                        if !cache.contains_key(&key) {
                            if cache.len() > 64 {
                                cache.clear();
                            }
                            cache.insert(key, linalg::expm(&self.m.mapv(|z| z * h))?);
                        }
                        let step = &cache[&key];
                        current = current.iter().map(|psi| step.dot(psi)).collect();
                    }
                    t_prev = t;
                    out.push(current.clone());
                }
                out
            }
        };
        let states = sample_times
            .iter()
            .zip(evolved)
            .map(|(&t, amps)| CovarianceState {
                t,
                dim: c0.dim(),
                repr: Repr::Modes {
                    weights: weights.clone(),
                    amps,
                },
            })
            .collect::<Vec<_>>();
        if let Some(bad) = states.iter().find(|s| !s.population(0).is_finite()) {
            return Err(Error::Unstable(format!(
                "non-finite covariance at t = {}",
                bad.time()
            )));
        }
        Ok(states)
    }
}

/// Covariance trajectory `c(t) = conj(U) c0 Uᵀ` at the requested times.
pub fn propagate_covariance(
    drift: &DriftMatrix,
    c0: &CovarianceState,
    sample_times: &[f64],
) -> Result<Vec<CovarianceState>> {
    Propagator::new(drift)?.propagate(c0, sample_times)
}

/// Same trajectory from the `(n+1)²`-dimensional linear system
/// `d vec(c)/dt = (M̄ ⊗ 1 + 1 ⊗ M) vec(c)` (row-major `vec`). Only
/// practical for small rings.
pub fn propagate_covariance_vectorized(
    drift: &DriftMatrix,
    c0: &CovarianceState,
    sample_times: &[f64],
) -> Result<Vec<CovarianceState>> {
    let m = drift.matrix();
    let d = m.nrows();
    let id = linalg::eye(d);
    let generator = linalg::kron(&linalg::conj(&m.view()).view(), &id.view())
        + linalg::kron(&id.view(), &m.view());
    let mut vec_c: CVector = c0.to_matrix().into_shape_with_order(d * d).expect("square");
    let mut t_prev = c0.time();
    let mut out = Vec::with_capacity(sample_times.len());
    for &t in sample_times {
        let h = t - t_prev;
        if h > 0.0 {
            vec_c = linalg::expm(&generator.mapv(|z| z * h))?.dot(&vec_c);
        }
        t_prev = t;
        let c = vec_c.clone().into_shape_with_order((d, d)).expect("square");
        out.push(CovarianceState {
            t,
            dim: d,
            repr: Repr::Dense(c),
        });
    }
    Ok(out)
}

/// Population of one site along a trajectory.
pub fn site_population(states: &[CovarianceState], site: usize) -> Result<TimeSeries> {
    TimeSeries::new(
        format!("population_{site}"),
        states.iter().map(|s| s.time()).collect(),
        states.iter().map(|s| s.population(site)).collect(),
    )
}

/// How the memory profile is scaled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProfileNormalization {
    /// Multiply by `χ_01²`, the inverse of the coupling that feeds site 1,
    /// so a normalized kernel gives `f → Θ(t - Δt)`.
    Kernel { chi_01: f64 },
    /// Rescale so the mean over `[from, to]` equals one.
    Plateau { from: f64, to: f64 },
}

/// `f(t) ∝ ⟨a_n† a_n⟩(t) / ⟨a_0† a_0⟩(t - Δt)`, with the denominator set to
/// one for `t < Δt`. Samples whose denominator falls below `1e-12` are
/// reported as NaN.
pub fn memory_profile(
    states: &[CovarianceState],
    delta_t: f64,
    normalization: ProfileNormalization,
) -> Result<TimeSeries> {
    let last = states
        .first()
        .map(|s| s.dim() - 1)
        .ok_or_else(|| Error::InvalidParameter("empty trajectory".into()))?;
    let site0 = site_population(states, 0)?;
    let raw: Vec<f64> = states
        .iter()
        .map(|s| {
            let t = s.time();
            let denom = if t < delta_t {
                Some(1.0)
            } else {
                site0.interpolate(t - delta_t)
            };
            match denom {
                Some(d) if d >= 1e-12 => s.population(last) / d,
                _ => f64::NAN,
            }
        })
        .collect();
    let times: Vec<f64> = states.iter().map(|s| s.time()).collect();
    let scale = match normalization {
        ProfileNormalization::Kernel { chi_01 } => chi_01 * chi_01,
        ProfileNormalization::Plateau { from, to } => {
            let raw_ts = TimeSeries::new("raw", times.clone(), raw.clone())?;
            let mean = raw_ts.window_mean(from, to).ok_or_else(|| {
                Error::InvalidParameter(format!("no samples in plateau window [{from}, {to}]"))
            })?;
            if !(mean > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "plateau mean {mean} is not positive"
                )));
            }
            1.0 / mean
        }
    };
    Ok(
        TimeSeries::new("memory_profile", times, raw.iter().map(|v| v * scale).collect())?
            .with_meta("delta_t", delta_t),
    )
}

/// 10–90 % rise time of a memory profile.
pub fn rise_width(profile: &TimeSeries) -> Option<f64> {
    let lo = profile.first_crossing(0.1, 0.0)?;
    let hi = profile.first_crossing(0.9, lo)?;
    Some(hi - lo)
}

/// Populations of the auxiliary sites `1..=n` (rows: samples, columns:
/// site `j` at column `j - 1`).
pub fn auxiliary_population_map(states: &[CovarianceState]) -> Array2<f64> {
    let Some(first) = states.first() else {
        return Array2::zeros((0, 0));
    };
    let n = first.dim() - 1;
    Array2::from_shape_fn((states.len(), n), |(i, j)| states[i].population(j + 1))
}

/// Time at which each auxiliary site reaches its maximum population.
pub fn auxiliary_peak_times(states: &[CovarianceState]) -> Vec<f64> {
    let map = auxiliary_population_map(states);
    map.columns()
        .into_iter()
        .map(|col| {
            let (imax, _) = col
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &v)| {
                    if v > best.1 {
                        (i, v)
                    } else {
                        best
                    }
                });
            states[imax].time()
        })
        .collect()
}
