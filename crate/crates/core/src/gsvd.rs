//! Generalized singular value decomposition of a channel pair.
//!
//! For `Hr` (`Nr x Nt`) and `He` (`Ne x Nt`) with `k = rank([Hr; He])` we compute
//!
//! ```text
//! Hr = Psi_r Sigma_r [Omega^-1 0] Psi_t^H
//! He = Psi_e Sigma_e [Omega^-1 0] Psi_t^H
//! ```
//!
//! with unitary `Psi_*`, lower-triangular `Omega` and block-diagonal `Sigma_*`.
//! The columns of `Psi_t` are grouped as eavesdropper-only (`k-p-s`), shared
//! (`s`), receiver-only (`p`) and unseen (`Nt-k`) directions.
//!
//! The construction is SVD of the stacked matrix, a CS decomposition of its
//! orthonormal factor, and an LQ factorization that produces the triangular part.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::matrix_core::{
    full_svd, orthogonal_complement, rank_is_ambiguous, rank_of_values, singular_values,
    validate, CMatrix, FullSvd, Tolerance, C64,
};

/// The fixed channel matrices `(Hr, He)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPair {
    hr: CMatrix,
    he: CMatrix,
}

impl ChannelPair {
    pub fn new(hr: CMatrix, he: CMatrix) -> Result<Self> {
        validate(&hr)?;
        validate(&he)?;
        if hr.ncols() != he.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "Hr has {} columns but He has {}",
                hr.ncols(),
                he.ncols()
            )));
        }
        Ok(ChannelPair { hr, he })
    }

    pub fn hr(&self) -> &CMatrix {
        &self.hr
    }

    pub fn he(&self) -> &CMatrix {
        &self.he
    }

    pub fn nt(&self) -> usize {
        self.hr.ncols()
    }

    pub fn nr(&self) -> usize {
        self.hr.nrows()
    }

    pub fn ne(&self) -> usize {
        self.he.nrows()
    }

    /// `[Hr; He]`.
    pub fn stacked(&self) -> CMatrix {
        let mut s = CMatrix::zeros(self.nr() + self.ne(), self.nt());
        s.rows_mut(0, self.nr()).copy_from(&self.hr);
        s.rows_mut(self.nr(), self.ne()).copy_from(&self.he);
        s
    }

    /// `(c Hr, c He)`.
    pub fn scaled(&self, c: f64) -> Self {
        let f = C64::new(c, 0.0);
        ChannelPair {
            hr: &self.hr * f,
            he: &self.he * f,
        }
    }
}

/// Dimensions of the input subspaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SubspaceDims {
    /// Rank of `[Hr; He]`.
    pub k: usize,
    /// Directions seen by the receiver only.
    pub p: usize,
    /// Directions seen by both terminals.
    pub s: usize,
}

impl SubspaceDims {
    /// Directions seen by the eavesdropper only.
    pub fn e_dim(&self) -> usize {
        self.k - self.p - self.s
    }

    /// Directions seen by neither terminal.
    pub fn n_dim(&self, nt: usize) -> usize {
        nt - self.k
    }
}

struct DimsDetail {
    dims: SubspaceDims,
    ambiguous: bool,
    stacked_svd: FullSvd,
}

fn dims_detail(ch: &ChannelPair, tol: &Tolerance) -> DimsDetail {
    let nt = ch.nt();
    let stacked_svd = full_svd(&ch.stacked());
    let k = rank_of_values(&stacked_svd.s, tol);
    let s_r = singular_values(ch.hr());
    let he_svd = full_svd(ch.he());
    let rr = rank_of_values(&s_r, tol);
    let re = rank_of_values(&he_svd.s, tol);
    let mut ambiguous = rank_is_ambiguous(&stacked_svd.s, tol)
        || rank_is_ambiguous(&s_r, tol)
        || rank_is_ambiguous(&he_svd.s, tol);

    // Null(He) intersected with the row space of the stacked matrix.
    let null_he = he_svd.v.columns(re, nt - re).into_owned();
    let row_space = stacked_svd.v.columns(0, k).into_owned();
    let p_int = if null_he.ncols() == 0 || k == 0 {
        0
    } else {
        let mut cat = CMatrix::zeros(nt, null_he.ncols() + k);
        cat.columns_mut(0, null_he.ncols()).copy_from(&null_he);
        cat.columns_mut(null_he.ncols(), k).copy_from(&row_space);
        let sv = singular_values(&cat);
        ambiguous |= rank_is_ambiguous(&sv, tol);
        (null_he.ncols() + k).saturating_sub(rank_of_values(&sv, tol))
    };
    let p = k.saturating_sub(re);
    let s_signed = rr as isize + re as isize - k as isize;
    if p_int != p || s_signed < 0 || re > k || rr > k {
        ambiguous = true;
    }
    let s = (s_signed.max(0) as usize).min(k - p);
    DimsDetail {
        dims: SubspaceDims { k, p, s },
        ambiguous,
        stacked_svd,
    }
}

/// Subspace dimensions `(k, p, s)` under the shared rank policy.
pub fn subspace_dims(ch: &ChannelPair, tol: &Tolerance) -> SubspaceDims {
    dims_detail(ch, tol).dims
}

/// Factors of the generalized singular value decomposition.
#[derive(Debug, Clone)]
pub struct GsvdResult {
    pub psi_r: CMatrix,
    pub psi_e: CMatrix,
    pub psi_t: CMatrix,
    /// Lower triangular, `k x k`.
    pub omega: CMatrix,
    /// `Omega^-1`, also lower triangular.
    pub omega_inv: CMatrix,
    pub dr: Vec<f64>,
    pub de: Vec<f64>,
    /// `dr[i] / de[i]`, ascending.
    pub sigma: Vec<f64>,
    pub dims: SubspaceDims,
    pub nr: usize,
    pub ne: usize,
    pub nt: usize,
    /// Some singular value was within a factor 10 of the rank cutoff.
    pub rank_ambiguous: bool,
}

fn orthonormalize(t: &CMatrix, order: &[usize]) -> (Vec<DVector<C64>>, Vec<f64>) {
    let n = t.nrows();
    let mut basis: Vec<DVector<C64>> = Vec::with_capacity(order.len());
    let mut norms = Vec::with_capacity(order.len());
    for &j in order {
        let mut v = t.column(j).into_owned();
        for _ in 0..2 {
            for b in &basis {
                let c = b.dotc(&v);
                v -= b * c;
            }
        }
        let nv = v.norm();
        let unit = if nv > 1e-300 {
            v / C64::new(nv, 0.0)
        } else {
            let mut cur = CMatrix::zeros(n, basis.len());
            for (i, b) in basis.iter().enumerate() {
                cur.set_column(i, b);
            }
            orthogonal_complement(&cur).column(0).into_owned()
        };
        basis.push(unit);
        norms.push(nv);
    }
    (basis, norms)
}

fn columns_of(vs: &[DVector<C64>], n: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n, vs.len());
    for (i, v) in vs.iter().enumerate() {
        m.set_column(i, v);
    }
    m
}

fn hstack(parts: &[&CMatrix], rows: usize) -> CMatrix {
    let cols: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let mut at = 0;
    for p in parts {
        out.columns_mut(at, p.ncols()).copy_from(*p);
        at += p.ncols();
    }
    out
}

/// Generalized singular value decomposition of `(Hr, He)`.
pub fn gsvd(ch: &ChannelPair, tol: &Tolerance) -> GsvdResult {
    let (nr, ne, nt) = (ch.nr(), ch.ne(), ch.nt());
    let detail = dims_detail(ch, tol);
    let dims = detail.dims;
    let SubspaceDims { k, p, s } = dims;
    let e = k - p - s;
    let svd = detail.stacked_svd;

    if k == 0 {
        return GsvdResult {
            psi_r: CMatrix::identity(nr, nr),
            psi_e: CMatrix::identity(ne, ne),
            psi_t: svd.v,
            omega: CMatrix::zeros(0, 0),
            omega_inv: CMatrix::zeros(0, 0),
            dr: Vec::new(),
            de: Vec::new(),
            sigma: Vec::new(),
            dims,
            nr,
            ne,
            nt,
            rank_ambiguous: detail.ambiguous,
        };
    }

    let v1 = svd.v.columns(0, k).into_owned();
    let v0 = svd.v.columns(k, nt - k).into_owned();
    let q = svd.u.columns(0, k).into_owned();
    let q1 = q.rows(0, nr).into_owned();
    let q2 = q.rows(nr, ne).into_owned();

    // CS decomposition: right singular vectors of the eavesdropper block,
    // ordered by decreasing sine (eavesdropper-only, shared, receiver-only).
    let cs = full_svd(&q2);
    let mut w = cs.v;

    // Within the shared block, order by increasing cosine/sine ratio.
    if s > 1 {
        let t1 = &q1 * &w;
        let t2 = &q2 * &w;
        let mut shared: Vec<(f64, usize)> = (e..e + s)
            .map(|j| (t1.column(j).norm() / t2.column(j).norm(), j))
            .collect();
        shared.sort_by(|a, b| a.0.total_cmp(&b.0));
        let old = w.clone();
        for (slot, &(_, j)) in shared.iter().enumerate() {
            w.set_column(e + slot, &old.column(j));
        }
    }
    let t1 = &q1 * &w;
    let t2 = &q2 * &w;

    // Receiver side: receiver-only columns first, then shared by decreasing cosine.
    let r_order: Vec<usize> = (e + s..k).chain((e..e + s).rev()).collect();
    let (r_basis, r_norms) = orthonormalize(&t1, &r_order);
    let mut ur_shared = vec![DVector::zeros(nr); s];
    let mut dr = vec![0.0; s];
    let mut ur_only = vec![DVector::zeros(nr); p];
    for ((&j, b), &nv) in r_order.iter().zip(r_basis).zip(&r_norms) {
        if j >= e + s {
            ur_only[j - e - s] = b;
        } else {
            ur_shared[j - e] = b;
            dr[j - e] = nv;
        }
    }
    let ur_shared = columns_of(&ur_shared, nr);
    let ur_only = columns_of(&ur_only, nr);
    let r_used = hstack(&[&ur_shared, &ur_only], nr);
    let r_comp = orthogonal_complement(&r_used);
    let psi_r = hstack(&[&r_comp, &ur_shared, &ur_only], nr);

    // Eavesdropper side: eavesdropper-only columns, then shared by decreasing sine.
    let e_order: Vec<usize> = (0..e + s).collect();
    let (e_basis, e_norms) = orthonormalize(&t2, &e_order);
    let de: Vec<f64> = e_norms[e..].to_vec();
    let ue = columns_of(&e_basis, ne);
    let e_comp = orthogonal_complement(&ue);
    let psi_e = hstack(&[&ue, &e_comp], ne);

    let mut sigma: Vec<f64> = dr.iter().zip(&de).map(|(r, d)| r / d).collect();
    for j in 1..s {
        if sigma[j] < sigma[j - 1] {
            sigma[j] = sigma[j - 1];
            dr[j] = sigma[j] * de[j];
        }
    }

    // LQ of W^H S1: M^H = Z R, so M = R^H Z^H with R^H lower triangular.
    let mut m = w.adjoint();
    for (j, &sv) in svd.s.iter().take(k).enumerate() {
        m.column_mut(j).scale_mut(sv);
    }
    let qr = m.adjoint().qr();
    let mut z = qr.q();
    let mut r = qr.r();
    for i in 0..k {
        let d = r[(i, i)];
        let a = d.norm();
        if a > 0.0 {
            let ph = d / C64::new(a, 0.0);
            z.column_mut(i).scale_mut_c(ph);
            r.row_mut(i).scale_mut_c(ph.conj());
        }
    }
    let omega_inv = r.adjoint();
    let omega = omega_inv
        .solve_lower_triangular(&CMatrix::identity(k, k))
        .unwrap_or_else(|| CMatrix::zeros(k, k));
    let psi_t = hstack(&[&(&v1 * &z), &v0], nt);

    GsvdResult {
        psi_r,
        psi_e,
        psi_t,
        omega,
        omega_inv,
        dr,
        de,
        sigma,
        dims,
        nr,
        ne,
        nt,
        rank_ambiguous: detail.ambiguous,
    }
}

trait ScaleC {
    fn scale_mut_c(&mut self, c: C64);
}

impl<R: nalgebra::Dim, C: nalgebra::Dim, S: nalgebra::StorageMut<C64, R, C>> ScaleC
    for nalgebra::Matrix<C64, R, C, S>
{
    fn scale_mut_c(&mut self, c: C64) {
        for x in self.iter_mut() {
            *x *= c;
        }
    }
}

impl GsvdResult {
    /// `Sigma_r`, `Nr x k` with row blocks `(Nr-p-s, s, p)` and column blocks `(k-p-s, s, p)`.
    pub fn sigma_r(&self) -> CMatrix {
        let SubspaceDims { k, p, s } = self.dims;
        let e = k - p - s;
        let mut m = CMatrix::zeros(self.nr, k);
        let off = self.nr - p - s;
        for j in 0..s {
            m[(off + j, e + j)] = C64::new(self.dr[j], 0.0);
        }
        for j in 0..p {
            m[(off + s + j, e + s + j)] = C64::new(1.0, 0.0);
        }
        m
    }

    /// `Sigma_e`, `Ne x k` with row blocks `(k-p-s, s, Ne+p-k)`.
    pub fn sigma_e(&self) -> CMatrix {
        let SubspaceDims { k, p, s } = self.dims;
        let e = k - p - s;
        let mut m = CMatrix::zeros(self.ne, k);
        for j in 0..e {
            m[(j, j)] = C64::new(1.0, 0.0);
        }
        for j in 0..s {
            m[(e + j, e + j)] = C64::new(self.de[j], 0.0);
        }
        m
    }

    /// `[Omega^-1 0] Psi_t^H`, the `k x Nt` map shared by both factorizations.
    pub fn input_map(&self) -> CMatrix {
        let k = self.dims.k;
        &self.omega_inv * self.psi_t.columns(0, k).adjoint()
    }

    /// Rebuilds `(Hr, He)` from the factors.
    pub fn reconstruct(&self) -> (CMatrix, CMatrix) {
        let x = self.input_map();
        (
            &self.psi_r * self.sigma_r() * &x,
            &self.psi_e * self.sigma_e() * &x,
        )
    }

    /// Largest relative Frobenius reconstruction error over the two matrices.
    pub fn reconstruction_residual(&self, ch: &ChannelPair) -> f64 {
        let (hr, he) = self.reconstruct();
        let rel = |a: &CMatrix, b: &CMatrix| {
            let n = b.norm();
            if n == 0.0 {
                a.norm()
            } else {
                (a - b).norm() / n
            }
        };
        rel(&hr, ch.hr()).max(rel(&he, ch.he()))
    }

    /// Largest generalized singular value (infinite when `p > 0`).
    pub fn sigma_max(&self) -> f64 {
        if self.dims.p > 0 {
            f64::INFINITY
        } else {
            self.sigma.last().copied().unwrap_or(0.0)
        }
    }

    /// Diagonal block of `Omega` belonging to the shared directions.
    pub fn omega_shared(&self) -> CMatrix {
        let SubspaceDims { k, p, s } = self.dims;
        let e = k - p - s;
        self.omega.view((e, e), (s, s)).into_owned()
    }

    pub fn check_ambiguity(&self) -> Result<()> {
        if self.rank_ambiguous {
            Err(Error::NumericalRankAmbiguity)
        } else {
            Ok(())
        }
    }
}

/// Largest generalized singular value `sup ||Hr v|| / ||He v||`.
pub fn sigma_max(ch: &ChannelPair, tol: &Tolerance) -> f64 {
    gsvd(ch, tol).sigma_max()
}

/// Moore-Penrose pseudo-inverse of a full-column-rank `He` from the GSVD factors.
pub fn he_pseudo_inverse(g: &GsvdResult) -> Result<CMatrix> {
    let SubspaceDims { k, p, s } = g.dims;
    if k != g.nt || p != 0 {
        return Err(Error::RankDeficient);
    }
    let e = k - s;
    let mut b = CMatrix::zeros(k, g.ne);
    for j in 0..e {
        b[(j, j)] = C64::new(1.0, 0.0);
    }
    for j in 0..s {
        b[(e + j, e + j)] = C64::new(1.0 / g.de[j], 0.0);
    }
    Ok(&g.psi_t * &g.omega * b * g.psi_e.adjoint())
}

/// Orthogonal projector onto `Null(He)`.
pub fn null_projector_he(g: &GsvdResult) -> CMatrix {
    let start = g.dims.k - g.dims.p;
    let psi_ne = g.psi_t.columns(start, g.nt - start);
    &psi_ne * psi_ne.adjoint()
}

/// The GSVD written as independent parallel sub-channels.
#[derive(Debug, Clone)]
pub struct ParallelChannel {
    /// `(s+p) x k` receiver gains.
    pub sigma_r: CMatrix,
    /// `(k-p) x k` eavesdropper gains.
    pub sigma_e: CMatrix,
    /// `x -> x~`, `k x Nt`.
    pub input_transform: CMatrix,
    /// `yr -> yr~`, `(s+p) x Nr`.
    pub receiver_transform: CMatrix,
    /// `ye -> ye~`, `(k-p) x Ne`.
    pub eavesdropper_transform: CMatrix,
}

pub fn parallel_channel(g: &GsvdResult) -> ParallelChannel {
    let SubspaceDims { k, p, s } = g.dims;
    let off = g.nr - p - s;
    let sr = g.sigma_r();
    let se = g.sigma_e();
    ParallelChannel {
        sigma_r: sr.rows(off, s + p).into_owned(),
        sigma_e: se.rows(0, k - p).into_owned(),
        input_transform: g.input_map(),
        receiver_transform: g.psi_r.columns(off, s + p).adjoint(),
        eavesdropper_transform: g.psi_e.columns(0, k - p).adjoint(),
    }
}
