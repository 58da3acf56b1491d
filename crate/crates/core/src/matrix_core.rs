//! Dense complex-matrix utilities shared by the rest of the crate.
//!
//! Everything here works on `nalgebra::DMatrix<Complex64>`. Rank decisions go
//! through a single [`Tolerance`] so that every module truncates singular values
//! the same way.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Relative asymmetry accepted by operations that require a Hermitian input.
pub const HERMITIAN_RTOL: f64 = 1e-12;

/// Numerical policy shared by all modules.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerance {
    /// A singular value counts toward the rank iff `s_i > rank_rel * s_max`.
    pub rank_rel: f64,
    /// Absolute convergence threshold, in bits.
    pub conv_abs: f64,
    /// The noise cross-covariance is confined to `sigma_max <= 1 - psd_margin`.
    pub psd_margin: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rank_rel: 1e-10,
            conv_abs: 1e-5,
            psd_margin: 1e-7,
        }
    }
}

impl Tolerance {
    pub fn new(rank_rel: f64, conv_abs: f64, psd_margin: f64) -> Result<Self> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !ok(rank_rel) || rank_rel >= 1.0 {
            return Err(Error::InvalidTolerance(format!("rank_rel = {rank_rel}")));
        }
        if !ok(conv_abs) {
            return Err(Error::InvalidTolerance(format!("conv_abs = {conv_abs}")));
        }
        if !ok(psd_margin) || psd_margin >= 1.0 {
            return Err(Error::InvalidTolerance(format!("psd_margin = {psd_margin}")));
        }
        Ok(Tolerance {
            rank_rel,
            conv_abs,
            psd_margin,
        })
    }

    pub fn with_conv_abs(self, conv_abs: f64) -> Result<Self> {
        Tolerance::new(self.rank_rel, conv_abs, self.psd_margin)
    }

    /// Absolute singular-value cutoff for a matrix whose largest singular value is `s_max`.
    pub fn rank_threshold(&self, s_max: f64) -> f64 {
        self.rank_rel * s_max
    }
}

/// Builds a complex matrix from row-major real entries.
pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> CMatrix {
    assert_eq!(data.len(), rows * cols, "entry count");
    CMatrix::from_fn(rows, cols, |i, j| C64::new(data[i * cols + j], 0.0))
}

/// Real diagonal matrix.
pub fn real_diag(d: &[f64]) -> CMatrix {
    let n = d.len();
    CMatrix::from_fn(n, n, |i, j| if i == j { C64::new(d[i], 0.0) } else { C64::new(0.0, 0.0) })
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Rejects empty or non-finite matrices.
pub fn validate(m: &CMatrix) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::EmptyMatrix {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Real inner product `Re tr(A^H B)`.
pub fn inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

/// `(M + M^H) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// `||M - M^H||_F / ||M||_F` (0 for the zero matrix).
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let n = m.norm();
    if n == 0.0 {
        return 0.0;
    }
    (m - m.adjoint()).norm() / n
}

fn check_hermitian(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let d = hermitian_defect(m);
    if d > HERMITIAN_RTOL {
        return Err(Error::NotHermitian(d));
    }
    Ok(())
}

/// Natural log-determinant of a Hermitian positive-definite matrix.
pub fn logdet_hpd(m: &CMatrix) -> Result<f64> {
    check_hermitian(m)?;
    logdet_chol(&hermitian_part(m)).ok_or(Error::NotPositiveDefinite)
}

/// Cholesky factorization that rejects indefinite input.
///
/// nalgebra takes complex square roots of negative pivots instead of failing, so
/// the diagonal of the factor is checked to be real and positive.
pub fn chol(m: &CMatrix) -> Option<Cholesky<C64, Dyn>> {
    let c = m.clone().cholesky()?;
    let ok = c.l_dirty().diagonal().iter().all(|d| {
        d.re > 0.0 && d.re.is_finite() && d.im.abs() <= 1e-8 * d.re
    });
    ok.then_some(c)
}

/// Cholesky log-determinant without the Hermitian check.
pub(crate) fn logdet_chol(m: &CMatrix) -> Option<f64> {
    let c = chol(m)?;
    Some(2.0 * c.l_dirty().diagonal().iter().map(|d| d.re.ln()).sum::<f64>())
}

/// Eigen-decomposition of the Hermitian part of `m`, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let eig = hermitian_part(m).symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, idx[c])]);
    (vals, vecs)
}

/// Largest eigenvalue of the Hermitian part.
pub fn lambda_max(m: &CMatrix) -> f64 {
    let (vals, _) = hermitian_eigen(m);
    vals.last().copied().unwrap_or(0.0)
}

/// Singular value decomposition with a complete right factor.
///
/// `u` is `rows x min(rows, cols)`, `s` holds `cols` values in descending order
/// (padded with exact zeros when `rows < cols`), and `v` is a `cols x cols` unitary.
#[derive(Debug, Clone)]
pub struct FullSvd {
    pub u: CMatrix,
    pub s: Vec<f64>,
    pub v: CMatrix,
}

pub fn full_svd(m: &CMatrix) -> FullSvd {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return FullSvd {
            u: CMatrix::zeros(r, 0),
            s: vec![0.0; c],
            v: CMatrix::identity(c, c),
        };
    }
    if r >= c {
        let (u, s, v) = jacobi_svd(m);
        return FullSvd { u, s, v };
    }
    // m = (m^H)^H: the right factor of m^H becomes the left factor of m.
    let (ut, st, vt) = jacobi_svd(&m.adjoint());
    let mut s = st;
    s.resize(c, 0.0);
    FullSvd {
        u: vt,
        s,
        v: complete_basis(&ut),
    }
}

/// One-sided Jacobi SVD of a matrix with `rows >= cols`, sorted descending.
/// Returns `u` (`rows x cols`, orthonormal), the singular values and a unitary `v`.
fn jacobi_svd(m: &CMatrix) -> (CMatrix, Vec<f64>, CMatrix) {
    let (r, c) = m.shape();
    let mut a = m.clone();
    let mut v = CMatrix::identity(c, c);
    for _ in 0..JACOBI_SWEEPS {
        let mut rotated = false;
        for i in 0..c {
            for j in (i + 1)..c {
                let alpha = a.column(i).norm_squared();
                let beta = a.column(j).norm_squared();
                let gamma = a.column(i).dotc(&a.column(j));
                let g = gamma.norm();
                if g == 0.0 || g <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let ph = (gamma / g).conj();
                let zeta = (beta - alpha) / (2.0 * g);
                let t = if zeta == 0.0 {
                    1.0
                } else {
                    zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt())
                };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                rotate(&mut a, i, j, ph, cs, sn);
                rotate(&mut v, i, j, ph, cs, sn);
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..c).map(|j| a.column(j).norm()).collect();
    let mut idx: Vec<usize> = (0..c).collect();
    idx.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let s: Vec<f64> = idx.iter().map(|&j| norms[j]).collect();
    let v = CMatrix::from_fn(c, c, |i, j| v[(i, idx[j])]);
    let kept = s.iter().take_while(|&&x| x > 0.0).count();
    let mut u = CMatrix::zeros(r, kept);
    for (jj, &j) in idx.iter().take(kept).enumerate() {
        u.set_column(jj, &(a.column(j) / C64::new(norms[j], 0.0)));
    }
    let u = complete_basis(&u).columns(0, c).into_owned();
    (u, s, v)
}

const JACOBI_SWEEPS: usize = 100;

/// Applies the rotation `x' = cs x - sn y`, `y' = sn x + cs y` with `y = ph * col_j`.
fn rotate(m: &mut CMatrix, i: usize, j: usize, ph: C64, cs: f64, sn: f64) {
    for row in 0..m.nrows() {
        let x = m[(row, i)];
        let y = m[(row, j)] * ph;
        m[(row, i)] = x * cs - y * sn;
        m[(row, j)] = x * sn + y * cs;
    }
}

/// Extends orthonormal columns to a unitary matrix with Gram-Schmidt on unit vectors.
fn complete_basis(b: &CMatrix) -> CMatrix {
    let (n, m) = b.shape();
    let mut out = CMatrix::zeros(n, n);
    out.columns_mut(0, m).copy_from(b);
    let mut filled = m;
    for e in 0..n {
        if filled == n {
            break;
        }
        let mut x = DVector::<C64>::zeros(n);
        x[e] = C64::new(1.0, 0.0);
        for _ in 0..2 {
            for j in 0..filled {
                let q = out.column(j).into_owned();
                let proj = q.dotc(&x);
                x -= q * proj;
            }
        }
        let nx = x.norm();
        if nx > 1e-8 {
            out.set_column(filled, &(x / C64::new(nx, 0.0)));
            filled += 1;
        }
    }
    out
}

/// Singular values in descending order (`min(rows, cols)` of them).
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Vec::new();
    }
    let mut s = full_svd(m).s;
    s.truncate(r.min(c));
    s
}

pub fn spectral_norm(m: &CMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Number of singular values above `rank_rel * s_max`.
pub fn rank(m: &CMatrix, tol: &Tolerance) -> usize {
    rank_of_values(&singular_values(m), tol)
}

pub(crate) fn rank_of_values(s: &[f64], tol: &Tolerance) -> usize {
    let smax = s.first().copied().unwrap_or(0.0);
    if smax <= 0.0 {
        return 0;
    }
    let thr = tol.rank_threshold(smax);
    s.iter().filter(|&&x| x > thr).count()
}

/// True when some singular value sits within a factor 10 of the rank cutoff.
pub(crate) fn rank_is_ambiguous(s: &[f64], tol: &Tolerance) -> bool {
    let smax = s.first().copied().unwrap_or(0.0);
    if smax <= 0.0 {
        return false;
    }
    let thr = tol.rank_threshold(smax);
    s.iter().any(|&x| x > thr / 10.0 && x <= thr * 10.0)
}

/// Orthonormal basis of `Null(m)`, one column per basis vector.
pub fn null_space(m: &CMatrix, tol: &Tolerance) -> CMatrix {
    let svd = full_svd(m);
    let r = rank_of_values(&svd.s, tol);
    let c = m.ncols();
    svd.v.columns(r, c - r).into_owned()
}

/// Orthonormal basis of the column space of `m`.
pub fn column_space(m: &CMatrix, tol: &Tolerance) -> CMatrix {
    let svd = full_svd(m);
    let r = rank_of_values(&svd.s, tol);
    svd.u.columns(0, r).into_owned()
}

/// Orthonormal basis of the orthogonal complement of the span of the
/// orthonormal columns of `b` (an `n x m` matrix with `m <= n`).
pub fn orthogonal_complement(b: &CMatrix) -> CMatrix {
    let n = b.nrows();
    let m = b.ncols();
    if m == 0 {
        return CMatrix::identity(n, n);
    }
    let svd = full_svd(&b.adjoint());
    svd.v.columns(m, n - m).into_owned()
}

/// Moore-Penrose pseudo-inverse with the shared rank policy.
pub fn pinv(m: &CMatrix, tol: &Tolerance) -> CMatrix {
    let svd = full_svd(m);
    let r = rank_of_values(&svd.s, tol);
    let mut out = CMatrix::zeros(m.ncols(), m.nrows());
    for i in 0..r {
        let v = svd.v.column(i);
        let u = svd.u.column(i);
        out += (v * u.adjoint()) * C64::new(1.0 / svd.s[i], 0.0);
    }
    out
}

/// Euclidean projection of `s` onto `{x >= 0, sum x <= cap}`.
pub fn project_capped_simplex(s: &[f64], cap: f64) -> Vec<f64> {
    let clipped: Vec<f64> = s.iter().map(|&x| x.max(0.0)).collect();
    if clipped.iter().sum::<f64>() <= cap {
        return clipped;
    }
    let mut sorted = s.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut support = 1;
    for (j, &x) in sorted.iter().enumerate() {
        cum += x;
        if x > (cum - cap) / (j + 1) as f64 {
            support = j + 1;
        } else {
            break;
        }
    }
    // Shift around the support mean so that huge entries do not swallow `cap`.
    let n = support as f64;
    let mean = sorted[..support].iter().sum::<f64>() / n;
    let mut out: Vec<f64> = s.iter().map(|&x| ((x - mean) + cap / n).max(0.0)).collect();
    let total: f64 = out.iter().sum();
    if total > cap {
        out.iter_mut().for_each(|x| *x *= cap / total);
    }
    out
}

/// Nearest matrix in `{X >= 0, tr X <= trace_cap}` in Frobenius norm.
pub fn psd_project(m: &CMatrix, trace_cap: f64) -> Result<CMatrix> {
    if !(trace_cap > 0.0) || !trace_cap.is_finite() {
        return Err(Error::InvalidPower(trace_cap));
    }
    check_hermitian(m)?;
    let (vals, vecs) = hermitian_eigen(m);
    let mu = project_capped_simplex(&vals, trace_cap);
    Ok(reassemble(&vecs, &mu))
}

fn reassemble(vecs: &CMatrix, mu: &[f64]) -> CMatrix {
    let mut scaled = vecs.clone();
    for (j, &m) in mu.iter().enumerate() {
        scaled.column_mut(j).scale_mut(m);
    }
    hermitian_part(&(scaled * vecs.adjoint()))
}

/// Clips the singular values of `phi` at `radius`.
pub fn spectral_ball_project(phi: &CMatrix, radius: f64) -> CMatrix {
    let (r, c) = phi.shape();
    if r == 0 || c == 0 {
        return phi.clone();
    }
    let svd = full_svd(phi);
    let k = r.min(c);
    if svd.s[0] <= radius {
        return phi.clone();
    }
    let mut out = CMatrix::zeros(r, c);
    for i in 0..k {
        let w = svd.s[i].min(radius);
        if w > 0.0 {
            out += (svd.u.column(i) * svd.v.column(i).adjoint()) * C64::new(w, 0.0);
        }
    }
    let n = spectral_norm(&out);
    if n > radius {
        out *= C64::new(radius / n * (1.0 - 4.0 * f64::EPSILON), 0.0);
    }
    out
}

/// `S` with `K = S S^H`, from the eigen-decomposition (negative eigenvalues clipped).
pub fn psd_factor(k: &CMatrix) -> CMatrix {
    let (vals, mut vecs) = hermitian_eigen(k);
    for (j, &l) in vals.iter().enumerate() {
        vecs.column_mut(j).scale_mut(l.max(0.0).sqrt());
    }
    vecs
}
