//! Matrix product density operator on the qubit ring.
//!
//! A ring site's local index is the vectorized density matrix,
//! `p = 2 s + s'` for the entry `ρ[s][s']`. Tensors of shape
//! `(D_left, 4^k, D_right)` are stored by chain position, each position
//! holding `k = 1` or `2` ring sites. The state is kept in mixed canonical
//! form around `center` so that truncating a singular value spectrum
//! discards exactly the stated Frobenius weight.

use std::collections::BTreeMap;

use faer::{Mat, MatRef};
use ndarray::{s, Array1, Array2, Array3, ArrayD, IxDyn};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, ONE, ZERO};
use crate::superop::{bond_class, BondClass, ChannelStep, GateSet, TrotterSchedule};

/// Layout of the ring sites along the chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SiteOrdering {
    /// `0, 1, …, n`; the closing bond spans the whole chain and is reached
    /// by swaps.
    Linear,
    /// `0, n, 1, n-1, 2, …`; every bond spans at most two positions.
    Folded,
    /// Sites `k` and `n - k` share one position (local dimension 16), so
    /// every bond lies inside a position or joins neighbours and no swaps
    /// are ever needed.
    Paired,
}

impl SiteOrdering {
    /// Ring sites held at each chain position.
    fn cells(self, num_sites: usize) -> Vec<Vec<usize>> {
        match self {
            SiteOrdering::Linear => (0..num_sites).map(|s| vec![s]).collect(),
            SiteOrdering::Folded => {
                let mut v = Vec::with_capacity(num_sites);
                let (mut lo, mut hi) = (0, num_sites - 1);
                while lo <= hi {
                    v.push(vec![lo]);
                    if hi != lo {
                        v.push(vec![hi]);
                    }
                    lo += 1;
                    if hi == 0 {
                        break;
                    }
                    hi -= 1;
                }
                v
            }
            SiteOrdering::Paired => (0..num_sites.div_ceil(2))
                .map(|k| {
                    let other = num_sites - 1 - k;
                    if other == k {
                        vec![k]
                    } else {
                        vec![k, other]
                    }
                })
                .collect(),
        }
    }

    /// Ring sites in chain order.
    pub fn sites(self, num_sites: usize) -> Vec<usize> {
        self.cells(num_sites).concat()
    }
}

/// Truncation and size controls.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationConfig {
    /// Largest relative discarded weight `Σ_disc s² / Σ s²` per cut.
    pub cutoff: f64,
    /// Hard cap on any bond dimension.
    pub max_bond: usize,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self {
            cutoff: 1e-10,
            max_bond: 512,
        }
    }
}

/// Each chain position holds one or two ring sites; a position with sites
/// `[a, b]` has local index `4 p_a + p_b`.
#[derive(Clone, Debug)]
pub struct Mpdo {
    tensors: Vec<Array3<C64>>,
    cells: Vec<Vec<usize>>,
    position: Vec<usize>,
    center: usize,
    trunc: TruncationConfig,
    trunc_weight: f64,
}

/// Checks that `rho` is a 2 × 2 density matrix.
fn check_local_density(rho: &CMatrix) -> Result<()> {
    if rho.dim() != (2, 2) {
        return Err(Error::InvalidState("local density must be 2 x 2".into()));
    }
    if linalg::hermiticity_error(&rho.view()) > 1e-12 {
        return Err(Error::InvalidState("local density is not Hermitian".into()));
    }
    let (w, _) = linalg::eigh(rho)?;
    if w[0] < -1e-12 {
        return Err(Error::InvalidState(format!(
            "local density has negative eigenvalue {:e}",
            w[0]
        )));
    }
    let tr = linalg::trace(&rho.view());
    if (tr - ONE).norm() > 1e-12 {
        return Err(Error::InvalidState(format!("local density has trace {tr}")));
    }
    Ok(())
}

/// `|1⟩⟨1|`.
pub fn excited() -> CMatrix {
    Array2::from_shape_fn((2, 2), |(i, j)| if i == 1 && j == 1 { ONE } else { ZERO })
}

/// `|0⟩⟨0|`.
pub fn ground() -> CMatrix {
    Array2::from_shape_fn((2, 2), |(i, j)| if i == 0 && j == 0 { ONE } else { ZERO })
}

fn local_vector(rho: &CMatrix) -> [C64; 4] {
    [rho[[0, 0]], rho[[0, 1]], rho[[1, 0]], rho[[1, 1]]]
}

/// Local vector of a whole position from one vector per site.
fn cell_vector(vectors: &[&[C64; 4]]) -> Vec<C64> {
    vectors.iter().fold(vec![ONE], |acc, v| {
        acc.iter().flat_map(|a| v.iter().map(move |b| a * b)).collect()
    })
}

/// Reads a `(dl·d) × dr` or `dl × (d·dr)` matrix back into site layout.
fn site_tensor(m: MatRef<'_, C64>, dl: usize, d: usize, dr: usize) -> Array3<C64> {
    if m.nrows() == dl * d && m.ncols() == dr {
        Array3::from_shape_fn((dl, d, dr), |(l, p, r)| m[(l * d + p, r)])
    } else {
        Array3::from_shape_fn((dl, d, dr), |(l, p, r)| m[(l, p * dr + r)])
    }
}

fn row_major(m: MatRef<'_, C64>) -> Vec<C64> {
    let mut v = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            v.push(m[(i, j)]);
        }
    }
    v
}

/// Applies a 16 × 16 map to axes `a` (left index) and `b` of `t`, each of
/// extent 4.
fn apply_on_axes(t: ArrayD<C64>, gate: MatRef<'_, C64>, a: usize, b: usize) -> ArrayD<C64> {
    let nd = t.ndim();
    let mut perm = vec![a, b];
    perm.extend((0..nd).filter(|&i| i != a && i != b));
    let moved = t.permuted_axes(perm.clone()).as_standard_layout().into_owned();
    let shape = moved.shape().to_vec();
    let rest = moved.len() / 16;
    let (data, _) = moved.into_raw_vec_and_offset();
    let out = gate * MatRef::from_row_major_slice(&data, 16, rest);
    let mut inverse = vec![0; nd];
    for (i, &p) in perm.iter().enumerate() {
        inverse[p] = i;
    }
    ArrayD::from_shape_vec(shape, row_major(out.as_ref()))
        .expect("shape")
        .permuted_axes(inverse)
}

/// A two-site map on ring sites `left → right` (pair index
/// `4 p_left + p_right`).
type SiteGate<'a> = (MatRef<'a, C64>, usize, usize);

const TRACE_VEC: [C64; 4] = [ONE, ZERO, ZERO, ONE];
const EXCITED_VEC: [C64; 4] = [ZERO, ZERO, ZERO, ONE];

impl Mpdo {
    /// Site 0 in `site0`, the `n` auxiliary sites in the vacuum.
    pub fn init_product(n: usize, site0: &CMatrix, ordering: SiteOrdering, trunc: TruncationConfig) -> Result<Self> {
        let mut locals = vec![ground(); n + 1];
        locals[0] = site0.clone();
        Self::from_local_states(&locals, ordering, trunc)
    }

    /// Product state with the given local density matrices (indexed by
    /// ring site).
    pub fn from_local_states(locals: &[CMatrix], ordering: SiteOrdering, trunc: TruncationConfig) -> Result<Self> {
        if locals.len() < 2 {
            return Err(Error::InvalidParameter("a ring needs at least two sites".into()));
        }
        if !(trunc.cutoff >= 0.0 && trunc.cutoff < 1.0) || trunc.max_bond == 0 {
            return Err(Error::InvalidParameter(format!(
                "cutoff must lie in [0, 1) and max_bond >= 1, got {} and {}",
                trunc.cutoff, trunc.max_bond
            )));
        }
        for rho in locals {
            check_local_density(rho)?;
        }
        let vectors: Vec<[C64; 4]> = locals.iter().map(local_vector).collect();
        let cells = ordering.cells(locals.len());
        let mut position = vec![0; locals.len()];
        for (pos, cell) in cells.iter().enumerate() {
            for &site in cell {
                position[site] = pos;
            }
        }
        let tensors = cells
            .iter()
            .map(|cell| {
                let v = cell_vector(&cell.iter().map(|&s| &vectors[s]).collect::<Vec<_>>());
                let d = v.len();
                Array3::from_shape_vec((1, d, 1), v).expect("local vector")
            })
            .collect();
        Ok(Self {
            tensors,
            cells,
            position,
            center: 0,
            trunc,
            trunc_weight: 0.0,
        })
    }

    /// Number of ring sites, `n + 1`.
    pub fn num_sites(&self) -> usize {
        self.position.len()
    }

    /// Ring sites in chain order.
    pub fn site_order(&self) -> Vec<usize> {
        self.cells.concat()
    }

    pub fn truncation(&self) -> TruncationConfig {
        self.trunc
    }

    /// Sum of relative discarded weights over every truncation so far.
    pub fn truncation_weight(&self) -> f64 {
        self.trunc_weight
    }

    /// Bond dimensions between consecutive positions.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors[..self.tensors.len() - 1].iter().map(|t| t.shape()[2]).collect()
    }

    pub fn max_bond_dim(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    fn slot(&self, site: usize) -> usize {
        let pos = self.position[site];
        self.cells[pos].iter().position(|&s| s == site).expect("site in its cell")
    }

    fn move_center_to(&mut self, target: usize) -> Result<()> {
        while self.center < target {
            let i = self.center;
            let (dl, d, dr) = self.tensors[i].dim();
            let t = &self.tensors[i];
            let m = Mat::from_fn(dl * d, dr, |r, c| t[[r / d, r % d, c]]);
            let (q, r) = linalg::qr_faer(m.as_ref());
            let next = &self.tensors[i + 1];
            let (_, d2, dr2) = next.dim();
            let nm = Mat::from_fn(dr, d2 * dr2, |r, c| next[[r, c / dr2, c % dr2]]);
            let k = q.ncols();
            self.tensors[i + 1] = site_tensor((&r * &nm).as_ref(), k, d2, dr2);
            self.tensors[i] = site_tensor(q.as_ref(), dl, d, k);
            self.center += 1;
        }
        while self.center > target {
            let i = self.center;
            let (dl, d, dr) = self.tensors[i].dim();
            let t = &self.tensors[i];
            // m† = q r, so m = r† q†
            let md = Mat::from_fn(d * dr, dl, |r, c| t[[c, r / dr, r % dr]].conj());
            let (q, r) = linalg::qr_faer(md.as_ref());
            let prev = &self.tensors[i - 1];
            let (dl0, d0, _) = prev.dim();
            let pm = Mat::from_fn(dl0 * d0, dl, |r, c| prev[[r / d0, r % d0, c]]);
            let k = q.ncols();
            self.tensors[i - 1] = site_tensor((&pm * r.adjoint()).as_ref(), dl0, d0, k);
            self.tensors[i] = site_tensor(q.adjoint().to_owned().as_ref(), k, d, dr);
            self.center -= 1;
        }
        Ok(())
    }

    /// Applies a map to two sites held at the same position.
    fn apply_local(&mut self, pos: usize, gate: MatRef<'_, C64>, left: usize, right: usize) -> Result<()> {
        self.move_center_to(pos)?;
        let (dl, d, dr) = self.tensors[pos].dim();
        let t = self.tensors[pos]
            .clone()
            .into_shape_with_order(IxDyn(&[dl, 4, 4, dr]))
            .expect("two sites");
        let out = apply_on_axes(t, gate, 1 + self.slot(left), 1 + self.slot(right));
        self.tensors[pos] = out
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((dl, d, dr))
            .expect("reshape");
        Ok(())
    }

    /// Contracts positions `pos` and `pos + 1`, applies `gates`, optionally
    /// exchanges the two positions, and splits again with truncation. The
    /// center ends on the side given by `center_right`.
    fn update_pair(&mut self, pos: usize, gates: &[SiteGate<'_>], exchange: bool, center_right: bool) -> Result<()> {
        if self.center != pos && self.center != pos + 1 {
            self.move_center_to(if self.center < pos { pos } else { pos + 1 })?;
        }
        let (a, b) = (&self.tensors[pos], &self.tensors[pos + 1]);
        let (dl, da, dm) = a.dim();
        let (_, db, dr) = b.dim();
        let am = Mat::from_fn(dl * da, dm, |r, c| a[[r / da, r % da, c]]);
        let bm = Mat::from_fn(dm, db * dr, |r, c| b[[r, c / dr, c % dr]]);
        let (ka, kb) = (self.cells[pos].len(), self.cells[pos + 1].len());
        let mut shape = vec![dl];
        shape.extend(std::iter::repeat_n(4, ka + kb));
        shape.push(dr);
        let mut theta = ArrayD::from_shape_vec(shape, row_major((&am * &bm).as_ref())).expect("shape");
        let axis = |site: usize, me: &Self| {
            let slot = me.slot(site);
            if me.position[site] == pos {
                1 + slot
            } else {
                1 + ka + slot
            }
        };
        for &(g, left, right) in gates {
            theta = apply_on_axes(theta, g, axis(left, self), axis(right, self));
        }
        if exchange {
            let mut perm = vec![0];
            perm.extend(1 + ka..1 + ka + kb);
            perm.extend(1..1 + ka);
            perm.push(1 + ka + kb);
            theta = theta.permuted_axes(perm);
            self.cells.swap(pos, pos + 1);
            for p in [pos, pos + 1] {
                for &site in &self.cells[p] {
                    self.position[site] = p;
                }
            }
        }
        let (dl_new, dr_new) = if exchange { (db, da) } else { (da, db) };
        let theta = theta.as_standard_layout().into_owned();
        let (data, _) = theta.into_raw_vec_and_offset();
        let m = MatRef::from_row_major_slice(&data, dl * dl_new, dr_new * dr);
        let t = linalg::truncated_split(m, self.trunc.cutoff, center_right)?;
        let keep = t.rank();
        if keep > self.trunc.max_bond {
            return Err(Error::BondDimension {
                bond: pos,
                required: keep,
                max_bond: self.trunc.max_bond,
            });
        }
        if t.total > 0.0 {
            self.trunc_weight += t.discarded / t.total;
        }
        self.center = if center_right { pos + 1 } else { pos };
        self.tensors[pos] = site_tensor(t.left.as_ref(), dl, dl_new, keep);
        self.tensors[pos + 1] = site_tensor(t.right.as_ref(), keep, dr_new, dr);
        Ok(())
    }

    /// Applies a local gate (pair index `4 p_left + p_right`) to ring sites
    /// `left` and `right`, transporting one of them by swaps if their
    /// positions are not neighbours and restoring the order afterwards.
    pub fn apply_gate(&mut self, local: &CMatrix, left: usize, right: usize) -> Result<()> {
        let n_sites = self.num_sites();
        if left >= n_sites || right >= n_sites || left == right || local.dim() != (16, 16) {
            return Err(Error::InvalidParameter(format!("invalid gate on site pair ({left}, {right})")));
        }
        let g = linalg::to_faer(&local.view());
        let gate = [(g.as_ref(), left, right)];
        let (p, q) = (self.position[left], self.position[right]);
        let (lo, hi) = (p.min(q), p.max(q));
        if lo == hi {
            return self.apply_local(lo, g.as_ref(), left, right);
        }
        let move_high = self.moves_high(lo, hi);
        let mut swaps = Vec::new();
        if move_high {
            for pos in (lo + 1..hi).rev() {
                self.update_pair(pos, &[], true, false)?;
                swaps.push(pos);
            }
        } else {
            for pos in lo..hi - 1 {
                self.update_pair(pos, &[], true, true)?;
                swaps.push(pos);
            }
        }
        let at = self.position[left].min(self.position[right]);
        self.update_pair(at, &gate, false, !move_high)?;
        for &pos in swaps.iter().rev() {
            self.update_pair(pos, &[], true, !move_high)?;
        }
        Ok(())
    }

    /// Which end of a distant pair gets transported. The driven site 0 is
    /// the most entangled one and stays put; otherwise the end nearer the
    /// orthogonality center moves.
    fn moves_high(&self, lo: usize, hi: usize) -> bool {
        if self.cells[lo].contains(&0) {
            true
        } else if self.cells[hi].contains(&0) {
            false
        } else {
            self.center.abs_diff(hi) <= self.center.abs_diff(lo)
        }
    }

    /// Applies a factorized two-qubit channel to ring bond `bond`
    /// (`bond → bond + 1 mod n + 1`).
    pub fn apply_channel_step(&mut self, step: &ChannelStep, bond: usize) -> Result<()> {
        if step.dim() != 4 {
            return Err(Error::InvalidParameter("channel must act on two qubits".into()));
        }
        let n_sites = self.num_sites();
        if bond >= n_sites {
            return Err(Error::InvalidParameter(format!("bond {bond} out of range")));
        }
        self.apply_gate(&step.local_gate(), bond, (bond + 1) % n_sites)
    }

    /// Applies the closing bond `n → 0`.
    pub fn close_ring(&mut self, step: &ChannelStep) -> Result<()> {
        let n = self.num_sites() - 1;
        self.apply_channel_step(step, n)
    }

    /// Contracts every site with the trace vector except the listed
    /// (site, vector) replacements.
    fn contract(&self, replace: &[(usize, &[C64; 4])]) -> C64 {
        let mut env = Array1::from_elem(1, ONE);
        for (t, cell) in self.tensors.iter().zip(&self.cells) {
            let vectors: Vec<&[C64; 4]> = cell
                .iter()
                .map(|site| {
                    replace
                        .iter()
                        .find(|(s, _)| s == site)
                        .map(|(_, v)| *v)
                        .unwrap_or(&TRACE_VEC)
                })
                .collect();
            let vec = cell_vector(&vectors);
            let (dl, _, dr) = t.dim();
            let mut next = Array1::zeros(dr);
            for a in 0..dl {
                let e = env[a];
                if e == ZERO {
                    continue;
                }
                for (p, &c) in vec.iter().enumerate() {
                    if c == ZERO {
                        continue;
                    }
                    let row = t.slice(s![a, p, ..]);
                    next.scaled_add(e * c, &row);
                }
            }
            env = next;
        }
        env[0]
    }

    /// `Tr ρ`.
    pub fn trace(&self) -> C64 {
        self.contract(&[])
    }

    /// `Tr(σ⁺σ⁻ ρ)` on site 0 without dividing by the trace.
    pub fn measure_site0_population(&self) -> f64 {
        self.site_population(0)
    }

    /// `Tr(σ⁺σ⁻ ρ) / Tr ρ` on site 0.
    pub fn measure_site0_population_normalized(&self) -> f64 {
        self.site_population(0) / self.trace().re
    }

    pub fn site_population(&self, site: usize) -> f64 {
        self.contract(&[(site, &EXCITED_VEC)]).re
    }

    /// Reduced 2 × 2 density matrix of one site (unnormalized).
    pub fn local_density(&self, site: usize) -> CMatrix {
        let mut out = Array2::zeros((2, 2));
        for p in 0..4 {
            let mut v = [ZERO; 4];
            v[p] = ONE;
            out[[p / 2, p % 2]] = self.contract(&[(site, &v)]);
        }
        out
    }

    /// Full density matrix; site `k` is bit `num_sites - 1 - k` of the basis
    /// index. Only sensible for a handful of sites.
    pub fn to_dense(&self) -> Result<CMatrix> {
        let n_sites = self.num_sites();
        if n_sites > 10 {
            return Err(Error::InvalidParameter("dense export limited to 10 sites".into()));
        }
        // Coefficients over position-ordered local indices.
        let mut acc: Array2<C64> = Array2::from_elem((1, 1), ONE);
        for t in &self.tensors {
            let (dl, d, dr) = t.dim();
            let m = t.to_shape((dl, d * dr)).expect("reshape");
            let rows = acc.nrows();
            acc = acc
                .dot(&m)
                .into_shape_with_order((rows * d, dr))
                .expect("reshape");
        }
        let order = self.site_order();
        let dim = 1usize << n_sites;
        let mut rho = Array2::zeros((dim, dim));
        for (idx, &val) in acc.column(0).iter().enumerate() {
            let mut row = 0;
            let mut col = 0;
            for (k, &site) in order.iter().enumerate() {
                let p = (idx >> (2 * (n_sites - 1 - k))) & 3;
                let bit = n_sites - 1 - site;
                row |= (p >> 1) << bit;
                col |= (p & 1) << bit;
            }
            rho[[row, col]] = val;
        }
        Ok(rho)
    }

    /// Applies every bond of one class with substep `dt`, walking from the
    /// end nearer the orthogonality center.
    fn sweep(&mut self, gates: &GateSet, class: BondClass, dt: f64) -> Result<()> {
        let n_sites = self.num_sites();
        let mut groups: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for j in (0..n_sites).filter(|&j| bond_class(j, n_sites - 1) == class) {
            let (a, b) = (self.position[j], self.position[(j + 1) % n_sites]);
            groups.entry((a.min(b), a.max(b))).or_default().push(j);
        }
        let mut groups: Vec<_> = groups.into_iter().collect();
        // A distant pair is visited where its transported end sits.
        groups.sort_by_key(|((lo, hi), _)| if hi - lo > 1 && self.moves_high(*lo, *hi) { *hi } else { *lo });
        let forward = self.center <= self.tensors.len() / 2;
        if !forward {
            groups.reverse();
        }
        for ((lo, hi), bonds) in groups {
            let mut local = Vec::with_capacity(bonds.len());
            for &j in &bonds {
                local.push((linalg::to_faer(&gates.get(j, dt)?.local.view()), j, (j + 1) % n_sites));
            }
            if lo == hi {
                for (g, l, r) in &local {
                    self.apply_local(lo, g.as_ref(), *l, *r)?;
                }
            } else if hi == lo + 1 {
                let refs: Vec<SiteGate<'_>> = local.iter().map(|(g, l, r)| (g.as_ref(), *l, *r)).collect();
                self.update_pair(lo, &refs, false, forward)?;
            } else {
                for &j in &bonds {
                    self.apply_gate(&gates.get(j, dt)?.local, j, (j + 1) % n_sites)?;
                }
            }
        }
        Ok(())
    }
}

/// Sampled diagnostics of an MPDO run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvolutionLog {
    pub times: Vec<f64>,
    /// Unnormalized `Tr(σ⁺σ⁻ ρ)` of site 0.
    pub population: Vec<f64>,
    pub population_normalized: Vec<f64>,
    /// `Re Tr ρ`.
    pub trace: Vec<f64>,
    pub trace_imag: Vec<f64>,
    pub max_bond_dim: Vec<usize>,
    pub truncation_weight: Vec<f64>,
}

impl EvolutionLog {
    fn record(&mut self, t: f64, state: &Mpdo) -> Result<()> {
        let tr = state.trace();
        let pop = state.measure_site0_population();
        if !(tr.re.is_finite() && pop.is_finite()) {
            return Err(Error::Unstable(format!("non-finite MPDO observables at t = {t}")));
        }
        self.times.push(t);
        self.population.push(pop);
        self.population_normalized.push(pop / tr.re);
        self.trace.push(tr.re);
        self.trace_imag.push(tr.im);
        self.max_bond_dim.push(state.max_bond_dim());
        self.truncation_weight.push(state.truncation_weight());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Runs `round(t_max / dt)` Trotter steps, sampling every `sample_every`
/// steps (and at the start).
pub fn evolve(
    state: &mut Mpdo,
    schedule: &TrotterSchedule,
    gates: &GateSet,
    t_max: f64,
    sample_every: usize,
) -> Result<EvolutionLog> {
    let n = state.num_sites() - 1;
    if gates.n() != n {
        return Err(Error::InvalidParameter(format!(
            "gate set built for n = {} but state has n = {n}",
            gates.n()
        )));
    }
    if sample_every == 0 {
        return Err(Error::InvalidParameter("sample_every must be >= 1".into()));
    }
    let steps = (t_max / schedule.dt).round() as usize;
    let mut log = EvolutionLog::default();
    log.record(0.0, state)?;
    let mut done = 0;
    while done < steps {
        let chunk = sample_every.min(steps - done);
        for (class, dt) in schedule.operations(n, chunk) {
            state.sweep(gates, class, dt)?;
        }
        done += chunk;
        log.record(done as f64 * schedule.dt, state)?;
    }
    Ok(log)
}
