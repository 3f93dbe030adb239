//! Two-site Lindblad generators of the qubit ring, their exponentials for
//! the Trotter substeps, and the factorization of each exponential into
//! operator pairs `ρ ↦ Σ_k L_k ρ R_k†`.
//!
//! Conventions: a two-site basis state is `2 s_left + s_right` with `s = 1`
//! the excited level, `σ⁻ = |0⟩⟨1|`. Superoperators act on column-stacked
//! density matrices, `vec(X)[i + d j] = X[i][j]`, so that
//! `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.

use std::collections::hash_map::Entry;
use std::collections::HashMap;

use ndarray::{array, Array2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, I, ONE, ZERO};
use crate::model::{Bond, DerivedParams};

/// Single-site lowering operator `|0⟩⟨1|`.
pub fn sigma_minus() -> CMatrix {
    array![[ZERO, ONE], [ZERO, ZERO]]
}

/// `σ⁺ + σ⁻`.
pub fn sigma_x() -> CMatrix {
    array![[ZERO, ONE], [ONE, ZERO]]
}

/// Hamiltonian and jump operator of one bond on its two sites.
#[derive(Clone, Debug, PartialEq)]
pub struct BondGenerator {
    pub bond: Bond,
    pub h: CMatrix,
    pub jump: CMatrix,
    pub includes_drive: bool,
}

/// Generator of bond `j`. Half of the site-0 drive `Ω(σ₀⁺ + σ₀⁻)` sits on
/// bond `0 → 1` and half on bond `n → 0`.
pub fn build_bond(j: usize, p: &DerivedParams, omega: f64) -> Result<BondGenerator> {
    let bond = p.bond(j)?;
    let drive_left = if bond.left == 0 { 0.5 * omega } else { 0.0 };
    let drive_right = if bond.right == 0 { 0.5 * omega } else { 0.0 };
    Ok(bond_generator(bond, drive_left, drive_right))
}

/// Generator of an arbitrary bond with local `σ_x` drives of the given
/// strengths on its two sites:
/// `H = (γ_b χ_b / 2)(σ⁻_l σ⁺_r + σ⁺_l σ⁻_r) + Ω_l σ_x^l + Ω_r σ_x^r`,
/// `J = √γ_b (σ⁻_l - i χ_b σ⁻_r)`.
pub fn bond_generator(bond: Bond, drive_left: f64, drive_right: f64) -> BondGenerator {
    let id = linalg::eye(2);
    let sm = sigma_minus();
    let sm_l = linalg::kron(&sm.view(), &id.view());
    let sm_r = linalg::kron(&id.view(), &sm.view());
    let hop = sm_l.dot(&linalg::dagger(&sm_r.view()));
    let mut h = (&hop + &linalg::dagger(&hop.view())) * C64::from(0.5 * bond.rate * bond.weight);
    if drive_left != 0.0 {
        h = h + linalg::kron(&sigma_x().view(), &id.view()) * C64::from(drive_left);
    }
    if drive_right != 0.0 {
        h = h + linalg::kron(&id.view(), &sigma_x().view()) * C64::from(drive_right);
    }
    let jump = (&sm_l - &(&sm_r * (I * bond.weight))) * C64::from(bond.rate.sqrt());
    BondGenerator {
        bond,
        h,
        jump,
        includes_drive: drive_left != 0.0 || drive_right != 0.0,
    }
}

/// Column-stacked matrix of `ρ ↦ -i[H, ρ] + Σ_k (J_k ρ J_k† - ½{J_k†J_k, ρ})`.
pub fn lindbladian_matrix(h: &CMatrix, jumps: &[CMatrix]) -> CMatrix {
    let d = h.nrows();
    let id = linalg::eye(d);
    let mut l = linalg::kron(&id.view(), &h.view()) * (-I) + linalg::kron(&h.t(), &id.view()) * I;
    for j in jumps {
        let jdj = linalg::dagger(&j.view()).dot(j);
        l = l + linalg::kron(&linalg::conj(&j.view()).view(), &j.view())
            - linalg::kron(&id.view(), &jdj.view()) * C64::from(0.5)
            - linalg::kron(&jdj.t(), &id.view()) * C64::from(0.5);
    }
    l
}

/// 16 × 16 superoperator of one bond.
pub fn vectorize_lindbladian(b: &BondGenerator) -> CMatrix {
    lindbladian_matrix(&b.h, std::slice::from_ref(&b.jump))
}

/// `e^{L dt}`; `dt` may be negative.
pub fn exponentiate(l: &CMatrix, dt: f64) -> Result<CMatrix> {
    linalg::expm(&l.mapv(|z| z * dt))
}

/// Column-stacked vectorization.
pub fn vec_col(x: &CMatrix) -> Vec<C64> {
    x.t().iter().copied().collect()
}

/// Inverse of [`vec_col`].
pub fn unvec_col(v: &[C64], d: usize) -> CMatrix {
    Array2::from_shape_fn((d, d), |(i, j)| v[i + d * j])
}

/// Largest entry of `vec(1)† S - vec(1)†`, zero for trace-preserving maps.
pub fn trace_preservation_error(s: &CMatrix) -> f64 {
    let d = (s.nrows() as f64).sqrt().round() as usize;
    (0..s.ncols())
        .map(|col| {
            let tr: C64 = (0..d).map(|i| s[[i + d * i, col]]).sum();
            let target = if col % (d + 1) == 0 { ONE } else { ZERO };
            (tr - target).norm()
        })
        .fold(0.0, f64::max)
}

/// Choi-type reshuffle `C[(i,k),(j,l)] = S[i + d j, k + d l]`, so that a
/// map `Σ L ρ R†` has `C = Σ vec_r(L) vec_r(R)†` with row-major `vec_r`.
pub fn choi_matrix(s: &CMatrix) -> CMatrix {
    let d = (s.nrows() as f64).sqrt().round() as usize;
    Array2::from_shape_fn((d * d, d * d), |(a, b)| {
        let (i, k) = (a / d, a % d);
        let (j, l) = (b / d, b % d);
        s[[i + d * j, k + d * l]]
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    /// Kraus form `Σ A_k ρ A_k†`.
    Cptp,
    /// Operator-sum form `Σ L_k ρ R_k†` of a trace-preserving linear map.
    LinearTp,
}

impl ChannelKind {
    /// Forward substeps are completely positive, backward ones are not.
    pub fn for_substep(dt: f64) -> Self {
        if dt >= 0.0 {
            ChannelKind::Cptp
        } else {
            ChannelKind::LinearTp
        }
    }
}

/// A factorized channel `ρ ↦ Σ_k L_k ρ R_k†`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelStep {
    pub kind: ChannelKind,
    /// `(L_k, R_k)`; for Kraus form both entries are `A_k`.
    pub pairs: Vec<(CMatrix, CMatrix)>,
    pub substep_dt: f64,
}

/// Choi eigenvalues or singular values at or below this are dropped.
pub const RANK_CUTOFF: f64 = 1e-12;

/// Factorizes a trace-preserving superoperator `E`.
pub fn factorize_channel(e: &CMatrix, kind: ChannelKind, substep_dt: f64) -> Result<ChannelStep> {
    let tp = trace_preservation_error(e);
    if tp > 1e-9 {
        return Err(Error::NotTracePreserving { deviation: tp });
    }
    let d = (e.nrows() as f64).sqrt().round() as usize;
    let choi = choi_matrix(e);
    let unflatten = |v: ndarray::ArrayView1<C64>, scale: f64| {
        Array2::from_shape_fn((d, d), |(i, k)| v[i * d + k] * scale)
    };
    let mut pairs = Vec::new();
    match kind {
        ChannelKind::Cptp => {
            let (w, u) = linalg::eigh(&choi)?;
            let min = w.iter().cloned().fold(f64::INFINITY, f64::min);
            if min < -1e-8 {
                return Err(Error::NotCompletelyPositive { eigenvalue: min });
            }
            // Largest weights first.
            for k in (0..w.len()).rev() {
                if w[k] > RANK_CUTOFF {
                    let a = unflatten(u.column(k), w[k].sqrt());
                    pairs.push((a.clone(), a));
                }
            }
        }
        ChannelKind::LinearTp => {
            let (u, s, vt) = linalg::svd(&choi)?;
            for k in 0..s.len() {
                if s[k] > RANK_CUTOFF {
                    let left = unflatten(u.column(k), s[k].sqrt());
                    let v = vt.row(k).mapv(|z| z.conj());
                    let right = unflatten(v.view(), s[k].sqrt());
                    pairs.push((left, right));
                }
            }
        }
    }
    Ok(ChannelStep {
        kind,
        pairs,
        substep_dt,
    })
}

/// Smallest Choi eigenvalue of `E`; negative values certify that the map
/// is not completely positive.
pub fn min_choi_eigenvalue(e: &CMatrix) -> Result<f64> {
    let (w, _) = linalg::eigh(&choi_matrix(e))?;
    Ok(w.iter().cloned().fold(f64::INFINITY, f64::min))
}

impl ChannelStep {
    pub fn dim(&self) -> usize {
        self.pairs.first().map_or(0, |(l, _)| l.nrows())
    }

    /// Column-stacked superoperator `Σ conj(R_k) ⊗ L_k`.
    pub fn superoperator(&self) -> CMatrix {
        let d = self.dim();
        let mut s = Array2::zeros((d * d, d * d));
        for (l, r) in &self.pairs {
            s = s + linalg::kron(&linalg::conj(&r.view()).view(), &l.view());
        }
        s
    }

    /// `max |Σ R_k† L_k - 1|`.
    pub fn completeness_error(&self) -> f64 {
        let d = self.dim();
        let mut acc = Array2::<C64>::zeros((d, d));
        for (l, r) in &self.pairs {
            acc = acc + linalg::dagger(&r.view()).dot(l);
        }
        (acc - linalg::eye(d)).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let mut out = Array2::zeros(rho.dim());
        for (l, r) in &self.pairs {
            out = out + l.dot(rho).dot(&linalg::dagger(&r.view()));
        }
        out
    }

    /// The same map as a 16 × 16 matrix on the product of the two sites'
    /// local density spaces. Each site's local index is `p = 2 s + s'` for
    /// the entry `ρ[s][s']`, and the pair index is `4 p_left + p_right`.
    pub fn local_gate(&self) -> CMatrix {
        assert_eq!(self.dim(), 4, "local gates are two-qubit maps");
        let mut g = Array2::zeros((16, 16));
        for (l, r) in &self.pairs {
            for a in 0..2 {
                for ap in 0..2 {
                    for b in 0..2 {
                        for bp in 0..2 {
                            let row = 4 * (2 * a + ap) + 2 * b + bp;
                            for c in 0..2 {
                                for cp in 0..2 {
                                    for dd in 0..2 {
                                        for dp in 0..2 {
                                            let col = 4 * (2 * c + cp) + 2 * dd + dp;
                                            g[[row, col]] += l[[2 * a + b, 2 * c + dd]]
                                                * r[[2 * ap + bp, 2 * cp + dp]].conj();
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        g
    }
}

/// Local gate exchanging two sites.
pub fn swap_gate() -> CMatrix {
    Array2::from_shape_fn((16, 16), |(row, col)| {
        if row / 4 == col % 4 && row % 4 == col / 4 {
            ONE
        } else {
            ZERO
        }
    })
}

/// A local gate acting with its two sites exchanged.
pub fn reverse_gate(g: &CMatrix) -> CMatrix {
    Array2::from_shape_fn((16, 16), |(row, col)| {
        let r = 4 * (row % 4) + row / 4;
        let c = 4 * (col % 4) + col / 4;
        g[[r, c]]
    })
}

/// `(2 - 2^{1/3})^{-1}`.
pub const FOURTH_ORDER_W: f64 = 1.351_207_191_959_657_8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Substep {
    pub parity: Parity,
    pub dt: f64,
}

/// Fourth-order splitting `e1 o2 e3 o4 e3 o2 e1` of one time step.
#[derive(Clone, Debug, PartialEq)]
pub struct TrotterSchedule {
    pub dt: f64,
    pub w: f64,
    pub substeps: Vec<Substep>,
}

pub fn make_schedule(dt: f64) -> Result<TrotterSchedule> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("time step must be > 0, got {dt}")));
    }
    let w = FOURTH_ORDER_W;
    let dt1 = w * dt / 2.0;
    let dt2 = w * dt;
    let dt3 = (1.0 - w) * dt / 2.0;
    let dt4 = (1.0 - 2.0 * w) * dt;
    let sub = |parity, dt| Substep { parity, dt };
    let substeps = vec![
        sub(Parity::Even, dt1),
        sub(Parity::Odd, dt2),
        sub(Parity::Even, dt3),
        sub(Parity::Odd, dt4),
        sub(Parity::Even, dt3),
        sub(Parity::Odd, dt2),
        sub(Parity::Even, dt1),
    ];
    Ok(TrotterSchedule { dt, w, substeps })
}

/// Role of a bond in the sweep structure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BondClass {
    Even,
    Odd,
    /// The closing bond of a ring with an odd number of bonds.
    Remainder,
}

/// Parity class of bond `j` on a ring of `n + 1` sites.
pub fn bond_class(j: usize, n: usize) -> BondClass {
    if n.is_multiple_of(2) && j == n {
        BondClass::Remainder
    } else if j.is_multiple_of(2) {
        BondClass::Even
    } else {
        BondClass::Odd
    }
}

impl TrotterSchedule {
    /// Flat list of class sweeps `(class, dt)` for `steps` consecutive time
    /// steps on a ring of `n + 1` sites, with neighbouring sweeps of the
    /// same class merged.
    ///
    /// One step is the symmetric triple `S(w dt) S((1-2w) dt) S(w dt)` of
    /// second-order factors `S(τ) = E(τ/2) O(τ) E(τ/2)`, which merges into
    /// the seven substeps `e1 o2 e3 o4 e3 o2 e1`. On a ring with an odd
    /// number of bonds the closing bond forms its own class and every
    /// `E(σ)` becomes `E(σ/2) R(σ) E(σ/2)`; the result stays symmetric, so
    /// the composition keeps fourth order.
    pub fn operations(&self, n: usize, steps: usize) -> Vec<(BondClass, f64)> {
        let remainder = n.is_multiple_of(2);
        let mut ops: Vec<(BondClass, f64)> = Vec::with_capacity(10 * steps + 1);
        let push = |ops: &mut Vec<(BondClass, f64)>, class: BondClass, dt: f64| match ops.last_mut() {
            Some(last) if last.0 == class => last.1 += dt,
            _ => ops.push((class, dt)),
        };
        let even = |ops: &mut Vec<(BondClass, f64)>, sigma: f64| {
            if remainder {
                push(ops, BondClass::Even, sigma / 2.0);
                push(ops, BondClass::Remainder, sigma);
                push(ops, BondClass::Even, sigma / 2.0);
            } else {
                push(ops, BondClass::Even, sigma);
            }
        };
        let w = self.w;
        for _ in 0..steps {
            for c in [w, 1.0 - 2.0 * w, w] {
                let tau = c * self.dt;
                even(&mut ops, tau / 2.0);
                push(&mut ops, BondClass::Odd, tau);
                even(&mut ops, tau / 2.0);
            }
        }
        ops
    }

    /// Distinct sweep lengths that [`operations`](Self::operations) can
    /// produce.
    pub fn distinct_dts(&self, n: usize) -> Vec<f64> {
        let mut v = vec![];
        for (_, dt) in self.operations(n, 2) {
            if !v.contains(&dt) {
                v.push(dt);
            }
        }
        v
    }
}

/// One cached gate.
#[derive(Clone, Debug)]
pub struct Gate {
    pub step: ChannelStep,
    /// Local-space matrix, see [`ChannelStep::local_gate`].
    pub local: CMatrix,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum BondType {
    Entry,
    Interior,
    Closing,
}

/// Factorized gates for every bond type and substep length used by a run.
/// Immutable after construction.
#[derive(Clone, Debug)]
pub struct GateSet {
    n: usize,
    gates: HashMap<(BondType, u64), Gate>,
}

impl GateSet {
    pub fn new(p: &DerivedParams, omega: f64, schedule: &TrotterSchedule) -> Result<Self> {
        let n = p.n;
        let needed = schedule.distinct_dts(n);
        let types = [(BondType::Entry, 0), (BondType::Interior, 1), (BondType::Closing, n)];
        let mut gates = HashMap::new();
        for (ty, j) in types {
            let l = vectorize_lindbladian(&build_bond(j, p, omega)?);
            for &dt in &needed {
                let e = exponentiate(&l, dt)?;
                let step = factorize_channel(&e, ChannelKind::for_substep(dt), dt)?;
                let local = step.local_gate();
                gates.insert((ty, dt.to_bits()), Gate { step, local });
            }
        }
        Ok(Self { n, gates })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn get(&self, bond: usize, dt: f64) -> Result<&Gate> {
        let ty = if bond == 0 {
            BondType::Entry
        } else if bond == self.n {
            BondType::Closing
        } else {
            BondType::Interior
        };
        self.gates.get(&(ty, dt.to_bits())).ok_or_else(|| {
            Error::InvalidParameter(format!("no gate cached for bond {bond} and dt = {dt}"))
        })
    }

    pub fn steps(&self) -> impl Iterator<Item = &ChannelStep> {
        self.gates.values().map(|g| &g.step)
    }
}

/// Operator on `num_sites` qubits acting as `op` (4 × 4) on sites
/// `left` and `right`. Site `k` is bit `num_sites - 1 - k` of the basis
/// index, so site 0 is the most significant.
pub fn embed_two_site(op: &CMatrix, left: usize, right: usize, num_sites: usize) -> CMatrix {
    let dim = 1usize << num_sites;
    let bl = num_sites - 1 - left;
    let br = num_sites - 1 - right;
    let mut out = Array2::zeros((dim, dim));
    for col in 0..dim {
        let cl = (col >> bl) & 1;
        let cr = (col >> br) & 1;
        let rest = col & !(1 << bl) & !(1 << br);
        for sl in 0..2 {
            for sr in 0..2 {
                let v = op[[2 * sl + sr, 2 * cl + cr]];
                if v != ZERO {
                    let row = rest | (sl << bl) | (sr << br);
                    out[[row, col]] += v;
                }
            }
        }
    }
    out
}

impl ChannelStep {
    /// Applies the map to bond `(left, right)` of a full-space density
    /// matrix.
    pub fn apply_embedded(&self, rho: &CMatrix, left: usize, right: usize, num_sites: usize) -> CMatrix {
        let mut out = Array2::zeros(rho.dim());
        for (l, r) in &self.pairs {
            let lf = embed_two_site(l, left, right, num_sites);
            let rf = embed_two_site(r, left, right, num_sites);
            out = out + lf.dot(rho).dot(&linalg::dagger(&rf.view()));
        }
        out
    }
}

/// Full column-stacked superoperator of a two-site channel embedded on
/// `num_sites` qubits.
pub fn embedded_superoperator(step: &ChannelStep, left: usize, right: usize, num_sites: usize) -> CMatrix {
    let dim = 1usize << num_sites;
    let mut s = Array2::zeros((dim * dim, dim * dim));
    for (l, r) in &step.pairs {
        let lf = embed_two_site(l, left, right, num_sites);
        let rf = embed_two_site(r, left, right, num_sites);
        s = s + linalg::kron(&linalg::conj(&rf.view()).view(), &lf.view());
    }
    s
}

/// Bond generators of a small ring with a drive of strength `omega` on
/// site 0, split between the two bonds touching it.
pub fn ring_generators(bonds: &[Bond], omega: f64) -> Vec<BondGenerator> {
    bonds
        .iter()
        .map(|&b| {
            let dl = if b.left == 0 { 0.5 * omega } else { 0.0 };
            let dr = if b.right == 0 { 0.5 * omega } else { 0.0 };
            bond_generator(b, dl, dr)
        })
        .collect()
}

/// `‖S_trotter(dt) - e^{L dt}‖_F` for one full time step on a ring of
/// `bonds.len()` qubits (at most 4).
pub fn trotter_step_error(bonds: &[Bond], omega: f64, dt: f64) -> Result<f64> {
    let num_sites = bonds.len();
    if !(2..=4).contains(&num_sites) {
        return Err(Error::InvalidParameter(format!(
            "dense Trotter check needs 2..=4 sites, got {num_sites}"
        )));
    }
    let n = num_sites - 1;
    let gens = ring_generators(bonds, omega);
    let dim = 1usize << num_sites;
    let mut h = Array2::zeros((dim, dim));
    let mut jumps = Vec::new();
    for g in &gens {
        h = h + embed_two_site(&g.h, g.bond.left, g.bond.right, num_sites);
        jumps.push(embed_two_site(&g.jump, g.bond.left, g.bond.right, num_sites));
    }
    let exact = exponentiate(&lindbladian_matrix(&h, &jumps), dt)?;

    let schedule = make_schedule(dt)?;
    let mut total = linalg::eye(dim * dim);
    let mut cache: HashMap<(usize, u64), CMatrix> = HashMap::new();
    for (class, sub_dt) in schedule.operations(n, 1) {
        for g in gens.iter().filter(|g| bond_class(g.bond.index, n) == class) {
            let key = (g.bond.index, sub_dt.to_bits());
            let op = match cache.entry(key) {
                Entry::Occupied(e) => e.into_mut(),
                Entry::Vacant(slot) => {
                    let e = exponentiate(&vectorize_lindbladian(g), sub_dt)?;
                    let step = factorize_channel(&e, ChannelKind::for_substep(sub_dt), sub_dt)?;
                    slot.insert(embedded_superoperator(&step, g.bond.left, g.bond.right, num_sites))
                }
            };
            total = op.dot(&total);
        }
    }
    Ok(linalg::frobenius(&(total - exact).view()))
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// A three-site ring with fast bonds, used to resolve the splitting
/// error above round-off: rates `rate`, unit weights except a weaker
/// closing bond.
pub fn trotter_test_ring(rate: f64) -> Vec<Bond> {
    (0..3)
        .map(|j| Bond {
            index: j,
            left: j,
            right: (j + 1) % 3,
            rate,
            weight: if j == 2 { 0.5 } else { 1.0 },
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{derive_params, ChainConfig};

    fn params() -> DerivedParams {
        derive_params(&ChainConfig::new(3, 1.0, 1.0)).unwrap()
    }

    #[test]
    fn interior_bond_structure() {
        let p = derive_params(&ChainConfig::new(7, 1.0, 1.0)).unwrap();
        let b = build_bond(2, &p, std::f64::consts::PI).unwrap();
        assert!(!b.includes_drive);
        // |10⟩ = 2, |01⟩ = 1.
        assert!((b.h[[2, 1]] - C64::from(p.gamma / 2.0)).norm() < 1e-14);
        let nonzero = b.h.iter().filter(|z| z.norm() > 0.0).count();
        assert_eq!(nonzero, 2);
        for row in 0..4 {
            assert_eq!(b.jump[[row, 0]], ZERO);
        }
    }

    #[test]
    fn half_drives_sum_to_full_drive() {
        let p = params();
        let omega = 2.5;
        let entry = build_bond(0, &p, omega).unwrap();
        let closing = build_bond(3, &p, omega).unwrap();
        let bare_entry = build_bond(0, &p, 0.0).unwrap();
        let bare_closing = build_bond(3, &p, 0.0).unwrap();
        let n_sites = 4;
        let total = embed_two_site(&(&entry.h - &bare_entry.h), 0, 1, n_sites)
            + embed_two_site(&(&closing.h - &bare_closing.h), 3, 0, n_sites);
        let id = linalg::eye(8);
        let expected = linalg::kron(&sigma_x().view(), &id.view()) * C64::from(omega);
        assert!(linalg::frobenius(&(total - expected).view()) < 1e-14);
    }

    #[test]
    fn lindbladian_matches_direct_action() {
        let p = params();
        let b = build_bond(0, &p, 1.3).unwrap();
        let l = vectorize_lindbladian(&b);
        let rho = Array2::from_shape_fn((4, 4), |(i, j)| C64::new((i + 2 * j) as f64, i as f64 - j as f64));
        let jd = linalg::dagger(&b.jump.view());
        let jdj = jd.dot(&b.jump);
        let direct = (b.h.dot(&rho) - rho.dot(&b.h)) * (-I) + b.jump.dot(&rho).dot(&jd)
            - (jdj.dot(&rho) + rho.dot(&jdj)) * C64::from(0.5);
        let via = unvec_col(&l.dot(&ndarray::Array1::from(vec_col(&rho))).to_vec(), 4);
        assert!(linalg::frobenius(&(via - direct).view()) < 1e-12);
    }

    #[test]
    fn kraus_of_identity_channel() {
        let step = factorize_channel(&linalg::eye(16), ChannelKind::Cptp, 0.0).unwrap();
        assert_eq!(step.pairs.len(), 1);
        let a = &step.pairs[0].0;
        let phase = a[[0, 0]];
        assert!(linalg::frobenius(&(a / phase - linalg::eye(4)).view()) < 1e-12);
        assert!((phase.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn depolarizing_choi_by_hand() {
        // ρ ↦ (1-q) ρ + q Tr(ρ) 1/2 on one qubit.
        let q = 0.3;
        let d = 2;
        let mut s = Array2::<C64>::zeros((4, 4));
        for i in 0..d {
            for j in 0..d {
                let col = i + d * j;
                s[[col, col]] += C64::from(1.0 - q);
                if i == j {
                    for k in 0..d {
                        s[[k + d * k, col]] += C64::from(q / 2.0);
                    }
                }
            }
        }
        let c = choi_matrix(&s);
        assert!((c[[0, 0]] - C64::from(1.0 - q / 2.0)).norm() < 1e-15);
        assert!((c[[0, 3]] - C64::from(1.0 - q)).norm() < 1e-15);
        assert!((c[[1, 1]] - C64::from(q / 2.0)).norm() < 1e-15);
        let (w, _) = linalg::eigh(&c).unwrap();
        let mut w = w.to_vec();
        w.sort_by(f64::total_cmp);
        let expected = [q / 2.0, q / 2.0, q / 2.0, 2.0 - 3.0 * q / 2.0];
        for (a, b) in w.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn swap_and_reverse_are_consistent() {
        let sw = swap_gate();
        assert!(linalg::frobenius(&(sw.dot(&sw) - linalg::eye(16)).view()) < 1e-15);
        let p = params();
        let e = exponentiate(&vectorize_lindbladian(&build_bond(1, &p, 0.0).unwrap()), 0.01).unwrap();
        let g = factorize_channel(&e, ChannelKind::Cptp, 0.01).unwrap().local_gate();
        let rev = reverse_gate(&g);
        assert!(linalg::frobenius(&(rev - sw.dot(&g).dot(&sw)).view()) < 1e-14);
    }

    #[test]
    fn schedule_sums() {
        let s = make_schedule(0.01).unwrap();
        assert_eq!(s.substeps.len(), 7);
        let even: f64 = s.substeps.iter().filter(|x| x.parity == Parity::Even).map(|x| x.dt).sum();
        let odd: f64 = s.substeps.iter().filter(|x| x.parity == Parity::Odd).map(|x| x.dt).sum();
        assert!((even - 0.01).abs() < 1e-15 && (odd - 0.01).abs() < 1e-15);
        assert!((s.w - 1.0 / (2.0 - 2f64.powf(1.0 / 3.0))).abs() < 1e-15);
        let ops = s.operations(3, 1);
        assert_eq!(ops.len(), 7);
        for (op, sub) in ops.iter().zip(&s.substeps) {
            let class = if sub.parity == Parity::Even { BondClass::Even } else { BondClass::Odd };
            assert_eq!(op.0, class);
            assert!((op.1 - sub.dt).abs() < 1e-17);
        }
        assert_eq!(s.operations(3, 3).len(), 19);
        // A merged even sweep has length 2 dt1 = dt2.
        assert_eq!(s.distinct_dts(3).len(), 4);
        let ops = s.operations(2, 1);
        let total = |c: BondClass| ops.iter().filter(|o| o.0 == c).map(|o| o.1).sum::<f64>();
        for c in [BondClass::Even, BondClass::Odd, BondClass::Remainder] {
            assert!((total(c) - 0.01).abs() < 1e-15);
        }
    }

    #[test]
    fn bond_classes() {
        assert_eq!(bond_class(3, 3), BondClass::Odd);
        assert_eq!(bond_class(0, 3), BondClass::Even);
        assert_eq!(bond_class(2, 2), BondClass::Remainder);
    }
}
