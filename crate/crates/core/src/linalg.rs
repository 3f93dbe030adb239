//! Dense complex helpers shared by the engines: matrix exponential,
//! Kronecker products and small utilities.

use faer::{Mat, MatRef};
use ndarray::{s, Array1, Array2, ArrayView2, Axis, ShapeBuilder};
use ndarray_linalg::{Eigh, FactorizeInto, JobSvd, Solve, SVDDC, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type CMatrix = Array2<C64>;
pub type CVector = Array1<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn dagger(a: &ArrayView2<C64>) -> CMatrix {
    a.t().mapv(|z| z.conj())
}

pub fn conj(a: &ArrayView2<C64>) -> CMatrix {
    a.mapv(|z| z.conj())
}

pub fn kron(a: &ArrayView2<C64>, b: &ArrayView2<C64>) -> CMatrix {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            if aij == ZERO {
                continue;
            }
            out.slice_mut(s![i * br..(i + 1) * br, j * bc..(j + 1) * bc])
                .assign(&b.mapv(|z| z * aij));
        }
    }
    out
}

pub fn eye(n: usize) -> CMatrix {
    Array2::eye(n)
}

pub fn frobenius(a: &ArrayView2<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn one_norm(a: &CMatrix) -> f64 {
    a.axis_iter(Axis(1))
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest deviation from Hermiticity, `max |a - a†|`.
pub fn hermiticity_error(a: &ArrayView2<C64>) -> f64 {
    let n = a.nrows();
    let mut err: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            err = err.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    err
}

pub fn trace(a: &ArrayView2<C64>) -> C64 {
    a.diag().sum()
}

/// Eigendecomposition of a Hermitian matrix, `a = v diag(w) v†`, with
/// ascending eigenvalues. The input is copied to column-major order first:
/// LAPACK reads a row-major buffer as the transpose, which for a complex
/// Hermitian matrix is its conjugate.
pub fn eigh(a: &CMatrix) -> Result<(Array1<f64>, CMatrix)> {
    let mut f = Array2::zeros(a.dim().f());
    f.assign(a);
    Ok(f.eigh(UPLO::Upper)?)
}

/// Thin singular value decomposition `a = u diag(s) vt` (divide and
/// conquer), singular values descending.
pub fn svd(a: &CMatrix) -> Result<(CMatrix, Array1<f64>, CMatrix)> {
    let (u, s, vt) = a.svddc(JobSvd::Some)?;
    Ok((
        u.expect("requested left vectors"),
        s,
        vt.expect("requested right vectors"),
    ))
}

/// Thin QR decomposition `a = q r`, `q` with orthonormal columns.
pub fn qr(a: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let (q, r) = qr_faer(to_faer(&a.view()).as_ref());
    Ok((from_faer(q.as_ref()), from_faer(r.as_ref())))
}

pub fn qr_faer(a: MatRef<'_, C64>) -> (Mat<C64>, Mat<C64>) {
    let f = a.qr();
    (f.compute_thin_Q(), f.thin_R().to_owned())
}

pub fn to_faer(a: &ArrayView2<C64>) -> Mat<C64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub fn from_faer(a: MatRef<'_, C64>) -> CMatrix {
    Array2::from_shape_fn((a.nrows(), a.ncols()), |(i, j)| a[(i, j)])
}

/// Kept part of a singular value decomposition, `a ≈ u diag(s) vt`.
#[derive(Clone, Debug)]
pub struct Truncation {
    pub u: Mat<C64>,
    pub s: Vec<f64>,
    pub vt: Mat<C64>,
    /// `Σ s²` over everything dropped.
    pub discarded: f64,
    /// `‖a‖²_F`.
    pub total: f64,
}

/// Singular value decomposition truncated to relative discarded weight
/// `cutoff`, never keeping fewer than one value.
pub fn truncated_svd(a: MatRef<'_, C64>, cutoff: f64) -> Result<Truncation> {
    let total = a.squared_norm_l2();
    if !total.is_finite() {
        return Err(Error::Unstable("non-finite entries in decomposition".into()));
    }
    let (u, s, vt) = thin_svd(a)?;
    let mut discarded = 0.0;
    let mut keep = s.len();
    while keep > 1 {
        let w = s[keep - 1] * s[keep - 1];
        if discarded + w > cutoff * total {
            break;
        }
        discarded += w;
        keep -= 1;
    }
    Ok(Truncation {
        u: u.subcols(0, keep).to_owned(),
        s: s[..keep].to_vec(),
        vt: vt.subrows(0, keep).to_owned(),
        discarded,
        total,
    })
}

/// Truncated factorization `a ≈ left · right` in which one factor is an
/// isometry: `left` has orthonormal columns when `isometric_left`, otherwise
/// `right` has orthonormal rows. The other factor is the projection of `a`
/// onto the kept subspace.
#[derive(Clone, Debug)]
pub struct Split {
    pub left: Mat<C64>,
    pub right: Mat<C64>,
    pub discarded: f64,
    pub total: f64,
}

impl Split {
    pub fn rank(&self) -> usize {
        self.left.ncols()
    }
}

// Gram eigenvalues carry an absolute error near 1e-16 of the total weight.
const GRAM_MIN_CUTOFF: f64 = 1e-13;

/// Splits `a` at the same relative discarded weight as [`truncated_svd`].
/// For cutoffs well above round-off it diagonalizes the Gram matrix on the
/// isometric side, which is cheaper than an SVD and gives the same
/// projection up to round-off.
pub fn truncated_split(a: MatRef<'_, C64>, cutoff: f64, isometric_left: bool) -> Result<Split> {
    if cutoff < GRAM_MIN_CUTOFF {
        let mut t = truncated_svd(a, cutoff)?;
        for (k, &sv) in t.s.iter().enumerate() {
            if isometric_left {
                t.vt.row_mut(k).iter_mut().for_each(|z| *z *= sv);
            } else {
                t.u.col_mut(k).iter_mut().for_each(|z| *z *= sv);
            }
        }
        return Ok(Split { left: t.u, right: t.vt, discarded: t.discarded, total: t.total });
    }
    let total = a.squared_norm_l2();
    if !total.is_finite() {
        return Err(Error::Unstable("non-finite entries in decomposition".into()));
    }
    // diagonalize on the smaller side; a thin QR restores the isometry
    // when it is wanted on the other one
    let rows_side = a.nrows() < a.ncols();
    let gram = if rows_side { a * a.adjoint() } else { a.adjoint() * a };
    let eig = gram
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Unstable(format!("eigendecomposition failed: {e:?}")))?;
    let w: Vec<f64> = eig.S().column_vector().iter().map(|z| z.re.max(0.0)).collect();
    // ascending order, so the discarded tail is at the front
    let mut drop = 0;
    let mut discarded = 0.0;
    while drop + 1 < w.len() && discarded + w[drop] <= cutoff * total {
        discarded += w[drop];
        drop += 1;
    }
    let kept = eig.U().subcols(drop, w.len() - drop);
    // largest weight first, as in an SVD
    let basis = Mat::from_fn(kept.nrows(), kept.ncols(), |i, j| kept[(i, kept.ncols() - 1 - j)]);
    let (left, right) = match (rows_side, isometric_left) {
        (true, true) => {
            let right = basis.adjoint() * a;
            (basis, right)
        }
        (false, false) => (a * &basis, basis.adjoint().to_owned()),
        (true, false) => {
            let (q, r) = qr_faer((a.adjoint() * &basis).as_ref());
            (&basis * r.adjoint(), q.adjoint().to_owned())
        }
        (false, true) => {
            let (q, r) = qr_faer((a * &basis).as_ref());
            (q, r * basis.adjoint())
        }
    };
    Ok(Split { left, right, discarded, total })
}

fn thin_svd(a: MatRef<'_, C64>) -> Result<(Mat<C64>, Vec<f64>, Mat<C64>)> {
    let f = a
        .thin_svd()
        .map_err(|e| Error::Unstable(format!("singular value decomposition failed: {e:?}")))?;
    let s = f.S().column_vector().iter().map(|z| z.re).collect();
    Ok((f.U().to_owned(), s, f.V().adjoint().to_owned()))
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
#[allow(clippy::excessive_precision)]
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068),
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with diagonal Padé
/// approximants (degree chosen from the 1-norm).
pub fn expm(a: &CMatrix) -> Result<CMatrix> {
    let n = a.nrows();
    let ident = eye(n);
    let norm = one_norm(a);
    if norm == 0.0 {
        return Ok(ident);
    }
    for &(m, theta) in &THETA {
        if norm <= theta {
            let b: &[f64] = match m {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            return pade_low(a, b, &ident);
        }
    }
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a.mapv(|z| z / 2f64.powi(squarings));
    let mut r = pade13(&scaled, &ident)?;
    for _ in 0..squarings {
        r = r.dot(&r);
    }
    Ok(r)
}

fn pade_low(a: &CMatrix, b: &[f64], ident: &CMatrix) -> Result<CMatrix> {
    let a2 = a.dot(a);
    let mut powers = vec![ident.clone(), a2.clone()];
    while powers.len() * 2 < b.len() {
        let next = powers.last().unwrap().dot(&a2);
        powers.push(next);
    }
    let mut u_inner = Array2::zeros(a.dim());
    let mut v = Array2::zeros(a.dim());
    for (k, p) in powers.iter().enumerate() {
        u_inner = u_inner + p * C64::from(b[2 * k + 1]);
        v = v + p * C64::from(b[2 * k]);
    }
    let u = a.dot(&u_inner);
    solve_pade(&u, &v)
}

fn pade13(a: &CMatrix, ident: &CMatrix) -> Result<CMatrix> {
    let b = &PADE13;
    let c = |k: usize| C64::from(b[k]);
    let a2 = a.dot(a);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let u_hi = &a6 * c(13) + &a4 * c(11) + &a2 * c(9);
    let u_lo = &a6 * c(7) + &a4 * c(5) + &a2 * c(3) + ident * c(1);
    let u = a.dot(&(a6.dot(&u_hi) + u_lo));
    let v_hi = &a6 * c(12) + &a4 * c(10) + &a2 * c(8);
    let v = a6.dot(&v_hi) + &a6 * c(6) + &a4 * c(4) + &a2 * c(2) + ident * c(0);
    solve_pade(&u, &v)
}

/// `(V - U)⁻¹ (V + U)`.
fn solve_pade(u: &CMatrix, v: &CMatrix) -> Result<CMatrix> {
    let p = v + u;
    let q = v - u;
    let lu = q.factorize_into()?;
    let mut out = Array2::zeros(p.dim());
    for (j, col) in p.axis_iter(Axis(1)).enumerate() {
        let x = lu.solve(&col.to_owned())?;
        out.column_mut(j).assign(&x);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use ndarray_linalg::Eig;

    fn random_matrix(n: usize, scale: f64, seed: u64) -> CMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, n), |_| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale
        })
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let z = Array2::<C64>::zeros((4, 4));
        assert_eq!(expm(&z).unwrap(), eye(4));
    }

    #[test]
    fn expm_matches_eigendecomposition() {
        for (seed, scale) in [(1, 0.005), (2, 0.1), (3, 0.5), (4, 1.5), (5, 4.0), (6, 20.0)] {
            let a = random_matrix(6, scale, seed);
            let (w, v) = a.eig().unwrap();
            let vinv = ndarray_linalg::Inverse::inv(&*v).unwrap();
            let d = Array2::from_diag(&w.mapv(|z| z.exp()));
            let reference = v.dot(&d).dot(&vinv);
            let e = expm(&a).unwrap();
            let err = frobenius(&(&e - &reference).view()) / frobenius(&reference.view());
            assert!(err < 1e-11, "scale {scale}: {err}");
        }
    }

    #[test]
    fn expm_inverse_pair() {
        let a = random_matrix(5, 3.0, 9);
        let e = expm(&a).unwrap();
        let f = expm(&a.mapv(|z| -z)).unwrap();
        let err = frobenius(&(e.dot(&f) - eye(5)).view());
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn expm_nilpotent() {
        let a = array![[ZERO, ONE], [ZERO, ZERO]];
        let e = expm(&a).unwrap();
        assert_eq!(e, array![[ONE, ONE], [ZERO, ONE]]);
    }

    #[test]
    fn eigh_reconstructs_complex_hermitian() {
        let r = random_matrix(5, 1.0, 11);
        let h = &r + &dagger(&r.view());
        let (w, v) = eigh(&h).unwrap();
        let back = v.dot(&Array2::from_diag(&w.mapv(C64::from))).dot(&dagger(&v.view()));
        assert!(frobenius(&(back - &h).view()) < 1e-12);
    }

    #[test]
    fn eig_reconstructs_general() {
        let a = random_matrix(5, 1.0, 12);
        let (w, v) = a.eig().unwrap();
        let resid = a.dot(&v) - v.dot(&Array2::from_diag(&w));
        assert!(frobenius(&resid.view()) < 1e-12);
    }

    #[test]
    fn svd_reconstructs_rectangular() {
        for (r, c) in [(6, 4), (4, 6)] {
            let a = Array2::from_shape_fn((r, c), |(i, j)| {
                C64::new((i * 7 + j * 3) as f64 % 5.0 - 2.0, (i + 2 * j) as f64 % 3.0 - 1.0)
            });
            let (u, s, vt) = svd(&a).unwrap();
            let back = u.dot(&Array2::from_diag(&s.mapv(C64::from))).dot(&vt);
            assert!(frobenius(&(back - &a).view()) < 1e-12);
            assert!(s.windows(2).into_iter().all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn qr_reconstructs_rectangular() {
        for (r, c) in [(8, 3), (3, 8)] {
            let a = Array2::from_shape_fn((r, c), |(i, j)| {
                C64::new((i * 5 + j * 3) as f64 % 7.0 - 3.0, (2 * i + j) as f64 % 4.0 - 1.5)
            });
            let (q, rr) = qr(&a).unwrap();
            assert_eq!(q.ncols(), r.min(c));
            assert!(frobenius(&(q.dot(&rr) - &a).view()) < 1e-12);
            let qq = dagger(&q.view()).dot(&q);
            assert!(frobenius(&(qq - eye(r.min(c))).view()) < 1e-12);
        }
    }

    fn graded(rows: usize, cols: usize) -> Mat<C64> {
        let (u, _) = qr(&random_matrix(rows, 1.0, 21)).unwrap();
        let (v, _) = qr(&random_matrix(cols, 1.0, 22)).unwrap();
        let k = rows.min(cols);
        let s = Array2::from_diag(&Array1::from_shape_fn(k, |i| C64::from(10f64.powf(-0.37 * i as f64))));
        let a = u.slice(s![.., ..k]).dot(&s).dot(&dagger(&v.slice(s![.., ..k])));
        to_faer(&a.view())
    }

    #[test]
    fn gram_split_matches_svd_truncation() {
        for (rows, cols) in [(40, 28), (28, 40)] {
            let a = graded(rows, cols);
            for cutoff in [1e-6, 1e-10, 1e-12] {
                let svd = truncated_svd(a.as_ref(), cutoff).unwrap();
                for iso_left in [true, false] {
                    let t = truncated_split(a.as_ref(), cutoff, iso_left).unwrap();
                    assert_eq!(t.rank(), svd.s.len(), "{rows}x{cols} {cutoff:e}");
                    let err = (a.as_ref() - &t.left * &t.right).squared_norm_l2();
                    assert!((err - t.discarded).abs() < 1e-14 * t.total, "{err:e} vs {:e}", t.discarded);
                    assert!(t.discarded <= cutoff * t.total);
                    let gram = if iso_left { t.left.adjoint() * &t.left } else { &t.right * t.right.adjoint() };
                    let id = Mat::<C64>::identity(t.rank(), t.rank());
                    assert!((gram - id).norm_l2() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn kron_layout() {
        let a = array![[ONE, ZERO], [ZERO, -ONE]];
        let b = array![[ZERO, ONE], [ONE, ZERO]];
        let k = kron(&a.view(), &b.view());
        assert_eq!(k[[0, 1]], ONE);
        assert_eq!(k[[2, 3]], -ONE);
        assert_eq!(k[[0, 3]], ZERO);
    }
}
