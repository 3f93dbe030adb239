//! Dense Lindblad integration of the full qubit ring for small `n`.
//!
//! Operators are assembled straight from the bond table on the
//! `2^(n+1)`-dimensional space (site `k` is bit `n - k` of the basis
//! index) and the master equation is stepped with classical RK4.

use ndarray::{Array1, Array2, Zip};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, I, ONE, ZERO};
use crate::model::{derive_params, Bond, ChainConfig, DerivedParams};
use crate::series::TimeSeries;

/// Largest ring handled, in auxiliary sites.
pub const MAX_N: usize = 7;

/// Row-compressed sparse operator.
#[derive(Clone, Debug, Default)]
struct Sparse {
    dim: usize,
    rows: Vec<Vec<(usize, C64)>>,
}

impl Sparse {
    fn zeros(dim: usize) -> Self {
        Self {
            dim,
            rows: vec![Vec::new(); dim],
        }
    }

    fn add(&mut self, row: usize, col: usize, v: C64) {
        if v == ZERO {
            return;
        }
        match self.rows[row].iter_mut().find(|(c, _)| *c == col) {
            Some((_, x)) => *x += v,
            None => self.rows[row].push((col, v)),
        }
    }

    fn add_scaled(&mut self, other: &Sparse, s: C64) {
        for (r, row) in other.rows.iter().enumerate() {
            for &(c, v) in row {
                self.add(r, c, v * s);
            }
        }
    }

    fn dagger(&self) -> Sparse {
        let mut out = Sparse::zeros(self.dim);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                out.add(c, r, v.conj());
            }
        }
        out
    }

    fn mul(&self, other: &Sparse) -> Sparse {
        let mut out = Sparse::zeros(self.dim);
        for (r, row) in self.rows.iter().enumerate() {
            for &(k, a) in row {
                for &(c, b) in &other.rows[k] {
                    out.add(r, c, a * b);
                }
            }
        }
        out
    }

    /// `self · m` for dense `m`.
    fn apply(&self, m: &CMatrix) -> CMatrix {
        let mut out = Array2::zeros(m.dim());
        for (r, row) in self.rows.iter().enumerate() {
            let mut target = out.row_mut(r);
            for &(k, v) in row {
                target.scaled_add(v, &m.row(k));
            }
        }
        out
    }

    fn to_dense(&self) -> CMatrix {
        let mut out = Array2::zeros((self.dim, self.dim));
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                out[[r, c]] += v;
            }
        }
        out
    }
}

/// Lowering operator of `site` on `num_sites` qubits.
fn lowering(site: usize, num_sites: usize) -> Sparse {
    let dim = 1 << num_sites;
    let bit = 1 << (num_sites - 1 - site);
    let mut op = Sparse::zeros(dim);
    for x in 0..dim {
        if x & bit != 0 {
            op.add(x ^ bit, x, ONE);
        }
    }
    op
}

/// Full-space generator of the driven ring.
#[derive(Clone, Debug)]
pub struct DenseLindblad {
    num_sites: usize,
    h: Sparse,
    jumps: Vec<Sparse>,
    /// `H - (i/2) Σ J†J`.
    h_eff: Sparse,
}

impl DenseLindblad {
    pub fn new(p: &DerivedParams, omega: f64) -> Result<Self> {
        if p.n > MAX_N {
            return Err(Error::InvalidParameter(format!(
                "dense integration supports n <= {MAX_N}, got {}",
                p.n
            )));
        }
        Ok(Self::from_bonds(p.num_sites(), &p.bonds(), omega))
    }

    /// `H = Ω σ_x^0 + Σ_b (γ_b χ_b / 2)(σ⁻_l σ⁺_r + h.c.)`,
    /// `J_b = √γ_b (σ⁻_l - i χ_b σ⁻_r)`.
    pub fn from_bonds(num_sites: usize, bonds: &[Bond], omega: f64) -> Self {
        let dim = 1 << num_sites;
        let lower: Vec<Sparse> = (0..num_sites).map(|k| lowering(k, num_sites)).collect();
        let raise: Vec<Sparse> = lower.iter().map(Sparse::dagger).collect();
        let mut h = Sparse::zeros(dim);
        h.add_scaled(&lower[0], C64::from(omega));
        h.add_scaled(&raise[0], C64::from(omega));
        let mut jumps = Vec::new();
        for b in bonds {
            let hop = lower[b.left].mul(&raise[b.right]);
            let amp = C64::from(0.5 * b.rate * b.weight);
            h.add_scaled(&hop, amp);
            h.add_scaled(&hop.dagger(), amp);
            let mut j = Sparse::zeros(dim);
            j.add_scaled(&lower[b.left], C64::from(b.rate.sqrt()));
            j.add_scaled(&lower[b.right], -I * (b.rate.sqrt() * b.weight));
            jumps.push(j);
        }
        let mut h_eff = h.clone();
        for j in &jumps {
            h_eff.add_scaled(&j.dagger().mul(j), C64::new(0.0, -0.5));
        }
        Self {
            num_sites,
            h,
            jumps,
            h_eff,
        }
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn dim(&self) -> usize {
        1 << self.num_sites
    }

    pub fn hamiltonian(&self) -> CMatrix {
        self.h.to_dense()
    }

    pub fn jump_operators(&self) -> Vec<CMatrix> {
        self.jumps.iter().map(Sparse::to_dense).collect()
    }

    /// `dρ/dt` for Hermitian `ρ`.
    pub fn rhs(&self, rho: &CMatrix) -> CMatrix {
        // -i H_eff ρ + h.c. + Σ J ρ J†, using ρ J† = (J ρ)†.
        let x = self.h_eff.apply(rho).mapv(|z| -I * z);
        let mut out = &x + &linalg::dagger(&x.view());
        for j in &self.jumps {
            let y = j.apply(rho);
            out += &j.apply(&linalg::dagger(&y.view()));
        }
        out
    }

    pub fn rk4_step(&self, rho: &CMatrix, dt: f64) -> CMatrix {
        let k1 = self.rhs(rho);
        let k2 = self.rhs(&(rho + &(&k1 * C64::from(0.5 * dt))));
        let k3 = self.rhs(&(rho + &(&k2 * C64::from(0.5 * dt))));
        let k4 = self.rhs(&(rho + &(&k3 * C64::from(dt))));
        let mut next = rho.clone();
        Zip::from(&mut next)
            .and(&k1)
            .and(&k2)
            .and(&k3)
            .and(&k4)
            .for_each(|r, &a, &b, &c, &d| *r += (a + (b + c) * 2.0 + d) * (dt / 6.0));
        next
    }
}

/// Full density matrix at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseState {
    pub rho: CMatrix,
    pub t: f64,
}

impl DenseState {
    /// Site 0 excited, every other site empty.
    pub fn excited_site0(num_sites: usize) -> Self {
        let dim = 1 << num_sites;
        let mut rho = Array2::zeros((dim, dim));
        let x = 1 << (num_sites - 1);
        rho[[x, x]] = ONE;
        Self { rho, t: 0.0 }
    }

    pub fn num_sites(&self) -> usize {
        self.rho.nrows().trailing_zeros() as usize
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.rho.view())
    }

    /// `⟨σ⁺σ⁻⟩` of `site`.
    pub fn population(&self, site: usize) -> f64 {
        let n = self.num_sites();
        let bit = 1 << (n - 1 - site);
        (0..self.rho.nrows()).filter(|x| x & bit != 0).map(|x| self.rho[[x, x]].re).sum()
    }

    /// Checks Hermiticity, unit trace and positivity.
    pub fn check(&self) -> Result<()> {
        let herm = linalg::hermiticity_error(&self.rho.view());
        if herm > 1e-10 {
            return Err(Error::InvalidState(format!("density matrix not Hermitian ({herm:e})")));
        }
        let tr = self.trace();
        if (tr - ONE).norm() > 1e-9 {
            return Err(Error::InvalidState(format!("density matrix trace {tr}")));
        }
        let (w, _) = linalg::eigh(&self.rho)?;
        if w[0] < -1e-9 {
            return Err(Error::InvalidState(format!("negative eigenvalue {:e}", w[0])));
        }
        Ok(())
    }
}

/// Sampled output of a dense run.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseRun {
    pub population: TimeSeries,
    pub trace: TimeSeries,
    /// Richardson estimate of the RK4 error in the population, from a
    /// second run at half the step.
    pub error_estimate: f64,
    pub final_state: DenseState,
}

/// Integrates from `state` to `t_max` with step `dt`, sampling every
/// `sample_every` steps.
pub fn integrate(
    gen: &DenseLindblad,
    state: &DenseState,
    t_max: f64,
    dt: f64,
    sample_every: usize,
) -> Result<(TimeSeries, TimeSeries, DenseState)> {
    if !(dt > 0.0) || sample_every == 0 {
        return Err(Error::InvalidParameter("need dt > 0 and sample_every >= 1".into()));
    }
    let steps = ((t_max - state.t) / dt).round() as usize;
    let mut rho = state.rho.clone();
    let tr0 = linalg::trace(&rho.view()).re;
    let mut times = vec![state.t];
    let mut pops = vec![state.population(0)];
    let mut traces = vec![tr0];
    let mut current = state.clone();
    for k in 1..=steps {
        rho = gen.rk4_step(&rho, dt);
        if k % sample_every == 0 || k == steps {
            current = DenseState {
                rho: rho.clone(),
                t: state.t + k as f64 * dt,
            };
            let tr = current.trace();
            if !tr.re.is_finite() || (tr.re - tr0).abs() > 1e-6 || tr.im.abs() > 1e-6 {
                return Err(Error::Unstable(format!(
                    "trace drifted to {tr} at t = {}; reduce the step",
                    current.t
                )));
            }
            times.push(current.t);
            pops.push(current.population(0));
            traces.push(tr.re);
        }
    }
    Ok((
        TimeSeries::new("brute_population", times.clone(), pops)?,
        TimeSeries::new("brute_trace", times, traces)?,
        current,
    ))
}

/// Site-0 population of the ring described by `cfg`, site 0 starting
/// excited. Runs at `dt_rk` and `dt_rk / 2` and reports the finer run.
pub fn dense_evolve(cfg: &ChainConfig, t_max: f64, dt_rk: f64, sample_interval: f64) -> Result<DenseRun> {
    let p = derive_params(cfg)?;
    if dt_rk > 1.0 / (10.0 * p.gamma) * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "dt_rk = {dt_rk} exceeds 1/(10 gamma) = {}",
            1.0 / (10.0 * p.gamma)
        )));
    }
    let gen = DenseLindblad::new(&p, cfg.omega)?;
    let every = (sample_interval / dt_rk).round().max(1.0) as usize;
    let init = DenseState::excited_site0(p.num_sites());
    let (coarse, _, _) = integrate(&gen, &init, t_max, dt_rk, every)?;
    let (fine, trace, final_state) = integrate(&gen, &init, t_max, dt_rk / 2.0, 2 * every)?;
    let diff = coarse
        .values
        .iter()
        .zip(&fine.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(DenseRun {
        population: fine,
        trace,
        error_estimate: diff / 15.0,
        final_state,
    })
}

/// Populations of every site.
pub fn site_populations(state: &DenseState) -> Array1<f64> {
    Array1::from_shape_fn(state.num_sites(), |k| state.population(k))
}
