//! Secrecy capacity through the min-max of `R+(K, Phi) = I(x; yr | ye)`.
//!
//! `C = min_Phi max_K R+(K, Phi)` where `K` ranges over transmit covariances with
//! `tr K <= P` and `Phi` over receiver/eavesdropper noise cross-covariances with
//! `sigma_max(Phi) <= 1`. `R+` is concave in `K` and convex in `Phi`; at the saddle
//! it coincides with `R-(K) = I(x; yr) - I(x; ye)`, which is achievable.
//!
//! The solver is a nested scheme: an outer projected-gradient descent on `Phi`
//! whose value function is evaluated by an inner projected-gradient ascent on `K`.
//! Each inner solve is certified by its Frank-Wolfe gap, so the reported gap
//! `R+ + FW - max(R-, 0)` bounds the distance to capacity from above.

use std::f64::consts::LN_2;

use nalgebra::Cholesky;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::gsvd::{sigma_max, ChannelPair};
use crate::matrix_core::{
    chol, full_svd, hermitian_defect, hermitian_eigen, hermitian_part, inner, lambda_max, logdet_chol, pinv,
    psd_factor, psd_project, spectral_ball_project, spectral_norm, validate, CMatrix, Tolerance,
    C64,
};

const MAX_OUTER: usize = 5000;
const MAX_INNER: usize = 20000;
const ARMIJO_C: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MIN_STEP: f64 = 1e-12;
const NONMONOTONE_WINDOW: usize = 10;
const STEP_RETRIES: usize = 8;
const INNER_GAP_FRACTION: f64 = 0.1;
const INITIAL_GAP_BITS: f64 = 1e-2;
const STALL_WINDOW: usize = 500;
const STALL_RTOL: f64 = 1e-14;
/// Outer iterations allowed without progress in the certificate or either bound.
const STALL_OUTER: usize = 60;
const SHARPEN_AFTER: usize = 5;
const PROGRESS_RTOL: f64 = 1e-9;
const POLISH_ITERS: usize = 200;
const POLISH_EVERY: usize = 10;

/// Total transmit power.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, serde::Serialize, serde::Deserialize)]
pub struct Power(f64);

impl Power {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_finite() && p > 0.0 {
            Ok(Power(p))
        } else {
            Err(Error::InvalidPower(p))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Cross-covariance `Phi = E[zr ze^H]` with `sigma_max(Phi) <= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCrossCov(CMatrix);

impl NoiseCrossCov {
    pub fn new(phi: CMatrix) -> Result<Self> {
        validate(&phi)?;
        let n = spectral_norm(&phi);
        if n > 1.0 + 1e-12 {
            return Err(Error::NoiseOutsideBall(n));
        }
        Ok(NoiseCrossCov(phi))
    }

    pub fn zeros(nr: usize, ne: usize) -> Self {
        NoiseCrossCov(CMatrix::zeros(nr, ne))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    pub fn sigma_max(&self) -> f64 {
        spectral_norm(&self.0)
    }
}

fn eye(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

fn check_k(ch: &ChannelPair, k: &CMatrix) -> Result<()> {
    let nt = ch.nt();
    if k.shape() != (nt, nt) {
        return Err(Error::DimensionMismatch(format!(
            "K is {}x{}, expected {nt}x{nt}",
            k.nrows(),
            k.ncols()
        )));
    }
    if k.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    let d = hermitian_defect(k);
    if d > 1e-10 {
        return Err(Error::NotHermitian(d));
    }
    let (vals, _) = hermitian_eigen(k);
    let scale = vals.iter().fold(1.0f64, |a, &b| a.max(b.abs()));
    if vals[0] < -1e-9 * scale {
        return Err(Error::NotPositiveSemidefinite(vals[0]));
    }
    Ok(())
}

fn check_phi(ch: &ChannelPair, phi: &NoiseCrossCov, tol: &Tolerance) -> Result<()> {
    let m = phi.matrix();
    if m.shape() != (ch.nr(), ch.ne()) {
        return Err(Error::DimensionMismatch(format!(
            "Phi is {}x{}, expected {}x{}",
            m.nrows(),
            m.ncols(),
            ch.nr(),
            ch.ne()
        )));
    }
    let n = phi.sigma_max();
    if n > 1.0 - tol.psd_margin * (1.0 - 1e-6) {
        return Err(Error::SingularNoise(n));
    }
    Ok(())
}

/// `cov(x | ye) = K - K He^H (I + He K He^H)^-1 He K`, computed in factored form.
fn conditional_cov(he: &CMatrix, k: &CMatrix) -> CMatrix {
    let s = psd_factor(k);
    let hs = he * &s;
    let a = eye(s.ncols()) + hs.adjoint() * &hs;
    let l = Cholesky::new_unchecked(hermitian_part(&a)).l();
    let x = l
        .solve_lower_triangular(&s.adjoint())
        .expect("I + S^H He^H He S is positive definite");
    hermitian_part(&(x.adjoint() * x))
}

fn plus_nats(ch: &ChannelPair, k: &CMatrix, phi: &CMatrix) -> Option<f64> {
    let nr = ch.nr();
    let n = eye(nr) - phi * phi.adjoint();
    let ln = chol(&hermitian_part(&n))?.l();
    let d = ch.hr() - phi * ch.he();
    let e = conditional_cov(ch.he(), k);
    let h = ln.solve_lower_triangular(&d)?;
    logdet_chol(&hermitian_part(&(eye(nr) + &h * e * h.adjoint())))
}

fn minus_nats(ch: &ChannelPair, k: &CMatrix) -> f64 {
    // det(I + Hr K Hr^H) / det(I + He K He^H) = det(Y^H Y + Z Z^H) with
    // A = I + S^H He^H He S = L L^H, X = L^-1 S^H, Y = Hr X^H, Z = L^-1.
    let s = psd_factor(k);
    let hs = ch.he() * &s;
    let a = eye(s.ncols()) + hs.adjoint() * &hs;
    let l = Cholesky::new_unchecked(hermitian_part(&a)).l();
    let n = l.nrows();
    let z = l
        .solve_lower_triangular(&eye(n))
        .expect("Cholesky factor is nonsingular");
    let x = &z * s.adjoint();
    let y = ch.hr() * x.adjoint();
    let m = hermitian_part(&(y.adjoint() * y + &z * z.adjoint()));
    logdet_chol(&m).unwrap_or_else(|| {
        let (vals, _) = hermitian_eigen(&m);
        vals.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).sum()
    })
}

/// `Theta = (Hr K He^H + Phi)(I + He K He^H)^-1` via a Cholesky solve.
fn theta_raw(ch: &ChannelPair, k: &CMatrix, phi: &CMatrix) -> (CMatrix, Cholesky<C64, nalgebra::Dyn>) {
    let he = ch.he();
    let ce = hermitian_part(&(eye(ch.ne()) + he * k * he.adjoint()));
    let cc = Cholesky::new_unchecked(ce);
    let b = he * k * ch.hr().adjoint() + phi.adjoint();
    (cc.solve(&b).adjoint(), cc)
}

fn grad_k_nats(ch: &ChannelPair, k: &CMatrix, phi: &CMatrix) -> Option<CMatrix> {
    let (theta, _) = theta_raw(ch, k, phi);
    let r = ch.hr() - theta * ch.he();
    let n = eye(ch.nr()) - phi * phi.adjoint();
    let d = ch.hr() - phi * ch.he();
    let e = conditional_cov(ch.he(), k);
    let lam = hermitian_part(&(n + &d * e * d.adjoint()));
    let lc = chol(&lam)?;
    Some(hermitian_part(&(r.adjoint() * lc.solve(&r))))
}

fn grad_phi_nats(ch: &ChannelPair, k: &CMatrix, phi: &CMatrix) -> Option<CMatrix> {
    let he = ch.he();
    let (_, cc) = theta_raw(ch, k, phi);
    let n = hermitian_part(&(eye(ch.nr()) - phi * phi.adjoint()));
    let d = ch.hr() - phi * he;
    let e = conditional_cov(he, k);
    let lam = hermitian_part(&(&n + &d * e * d.adjoint()));
    let lam_inv = chol(&lam)?.inverse();
    let n_inv = chol(&n)?.inverse();
    let e_he = cc.solve(&(he * k)).adjoint();
    Some(((n_inv - &lam_inv) * phi - lam_inv * d * e_he) * C64::new(2.0, 0.0))
}

/// `R+(K, Phi)` in bits.
pub fn rate_plus(ch: &ChannelPair, k: &CMatrix, phi: &NoiseCrossCov, tol: &Tolerance) -> Result<f64> {
    check_k(ch, k)?;
    check_phi(ch, phi, tol)?;
    plus_nats(ch, k, phi.matrix())
        .map(|v| v / LN_2)
        .ok_or_else(|| Error::SingularNoise(phi.sigma_max()))
}

/// `R-(K) = log det(I + Hr K Hr^H) - log det(I + He K He^H)` in bits.
pub fn rate_minus(ch: &ChannelPair, k: &CMatrix) -> Result<f64> {
    check_k(ch, k)?;
    Ok(minus_nats(ch, k) / LN_2)
}

/// MMSE coefficient of `zr` given `ye`-side information.
pub fn theta(ch: &ChannelPair, k: &CMatrix, phi: &NoiseCrossCov) -> Result<CMatrix> {
    check_k(ch, k)?;
    if phi.matrix().shape() != (ch.nr(), ch.ne()) {
        return Err(Error::DimensionMismatch("Phi shape".into()));
    }
    Ok(theta_raw(ch, k, phi.matrix()).0)
}

/// Gradient of `R+` (nats) with respect to `K`: `(Hr - Theta He)^H Lambda^-1 (Hr - Theta He)`.
pub fn grad_kp(ch: &ChannelPair, k: &CMatrix, phi: &NoiseCrossCov, tol: &Tolerance) -> Result<CMatrix> {
    check_k(ch, k)?;
    check_phi(ch, phi, tol)?;
    grad_k_nats(ch, k, phi.matrix()).ok_or_else(|| Error::SingularNoise(phi.sigma_max()))
}

fn k_phi(phi: &CMatrix) -> CMatrix {
    let (nr, ne) = phi.shape();
    let mut m = eye(nr + ne);
    m.view_mut((0, nr), (nr, ne)).copy_from(phi);
    m.view_mut((nr, 0), (ne, nr)).copy_from(&phi.adjoint());
    m
}

/// The same gradient through the chain rule on the stacked model:
/// `H^H (K_Phi + H K H^H)^-1 H - He^H (I + He K He^H)^-1 He`.
pub fn grad_kp_stacked(
    ch: &ChannelPair,
    k: &CMatrix,
    phi: &NoiseCrossCov,
    tol: &Tolerance,
) -> Result<CMatrix> {
    check_k(ch, k)?;
    check_phi(ch, phi, tol)?;
    let h = ch.stacked();
    let he = ch.he();
    let big = hermitian_part(&(k_phi(phi.matrix()) + &h * k * h.adjoint()));
    let bc = chol(&big).ok_or(Error::SingularNoise(phi.sigma_max()))?;
    let ce = hermitian_part(&(eye(ch.ne()) + he * k * he.adjoint()));
    let cc = Cholesky::new_unchecked(ce);
    Ok(hermitian_part(
        &(h.adjoint() * bc.solve(&h) - he.adjoint() * cc.solve(he)),
    ))
}

/// Gradient of `R+` (nats) with respect to `Phi` under `Re tr(A^H B)`.
pub fn grad_phi(ch: &ChannelPair, k: &CMatrix, phi: &NoiseCrossCov, tol: &Tolerance) -> Result<CMatrix> {
    check_k(ch, k)?;
    check_phi(ch, phi, tol)?;
    grad_phi_nats(ch, k, phi.matrix()).ok_or_else(|| Error::SingularNoise(phi.sigma_max()))
}

/// The same gradient as twice the upper-right block of `(K_Phi + H K H^H)^-1 - K_Phi^-1`.
pub fn grad_phi_block(
    ch: &ChannelPair,
    k: &CMatrix,
    phi: &NoiseCrossCov,
    tol: &Tolerance,
) -> Result<CMatrix> {
    check_k(ch, k)?;
    check_phi(ch, phi, tol)?;
    let h = ch.stacked();
    let kp = k_phi(phi.matrix());
    let err = || Error::SingularNoise(phi.sigma_max());
    let a = chol(&hermitian_part(&(&kp + &h * k * h.adjoint()))).ok_or_else(err)?.inverse();
    let b = chol(&hermitian_part(&kp)).ok_or_else(err)?.inverse();
    let d = a - b;
    Ok(d.view((0, ch.nr()), (ch.nr(), ch.ne())).into_owned() * C64::new(2.0, 0.0))
}

/// Frank-Wolfe gap of the inner problem: `P max(lambda_max(g), 0) - <g, K>`.
fn fw_gap(g: &CMatrix, k: &CMatrix, p: f64) -> f64 {
    (p * lambda_max(g).max(0.0) - inner(g, k)).max(0.0)
}

struct InnerState {
    k: CMatrix,
    f: f64,
    fw: f64,
    iterations: usize,
    converged: bool,
}

fn grad_minus_nats(ch: &ChannelPair, k: &CMatrix) -> Option<CMatrix> {
    let part = |h: &CMatrix| -> Option<CMatrix> {
        let c = hermitian_part(&(eye(h.nrows()) + h * k * h.adjoint()));
        Some(h.adjoint() * chol(&c)?.solve(h))
    };
    Some(hermitian_part(&(part(ch.hr())? - part(ch.he())?)))
}

/// Spectral projected gradient ascent over `{K >= 0, tr K <= p}` stopped on the Frank-Wolfe gap.
fn spg_ascent(
    f: impl Fn(&CMatrix) -> Option<f64>,
    grad: impl Fn(&CMatrix) -> Option<CMatrix>,
    p: f64,
    start: &CMatrix,
    tol_nats: f64,
    max_iter: usize,
) -> Option<InnerState> {
    let mut k = psd_project(&hermitian_part(start), p).ok()?;
    let mut fk = f(&k)?;
    let mut g = grad(&k)?;
    let mut alpha = 1.0;
    let mut hist = vec![fk];
    let mut fw = fw_gap(&g, &k, p);
    for it in 0..max_iter {
        if fw <= tol_nats {
            return Some(InnerState { k, f: fk, fw, iterations: it, converged: true });
        }
        let fref = hist[hist.len().saturating_sub(NONMONOTONE_WINDOW)..]
            .iter()
            .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut step = None;
        for _ in 0..STEP_RETRIES {
            let trial = psd_project(&(&k + &g * C64::new(alpha, 0.0)), p).ok()?;
            let d = trial - &k;
            let gd = inner(&g, &d);
            let mut t = 1.0;
            while t >= MIN_STEP {
                let kn = &k + &d * C64::new(t, 0.0);
                if let Some(fv) = f(&kn) {
                    if fv >= fref + ARMIJO_C * t * gd {
                        step = Some((kn, fv));
                        break;
                    }
                }
                t *= BACKTRACK;
            }
            if step.is_some() {
                break;
            }
            alpha *= 1e-4;
        }
        let Some((kn, fnew)) = step else {
            return Some(InnerState { k, f: fk, fw, iterations: it, converged: false });
        };
        let gn = grad(&kn)?;
        let s = &kn - &k;
        let y = &gn - &g;
        let sy = -inner(&s, &y);
        alpha = if sy > 0.0 { inner(&s, &s) / sy } else { alpha * 1e3 };
        alpha = alpha.clamp(1e-30, 1e30);
        k = kn;
        fk = fnew;
        g = gn;
        fw = fw_gap(&g, &k, p);
        hist.push(fk);
        if hist.len() > STALL_WINDOW {
            let past = hist[hist.len() - 1 - STALL_WINDOW];
            if fk - past <= STALL_RTOL * fk.abs().max(1.0) {
                return Some(InnerState { k, f: fk, fw, iterations: it + 1, converged: fw <= tol_nats });
            }
        }
    }
    Some(InnerState { k, f: fk, fw, iterations: max_iter, converged: fw <= tol_nats })
}

fn inner_solve(
    ch: &ChannelPair,
    phi: &CMatrix,
    p: f64,
    start: &CMatrix,
    tol_nats: f64,
) -> Option<InnerState> {
    spg_ascent(
        |k| plus_nats(ch, k, phi),
        |k| grad_k_nats(ch, k, phi),
        p,
        start,
        tol_nats,
        MAX_INNER,
    )
}

/// Local ascent on `R-` from `start`; every iterate is a valid lower bound on the capacity.
fn polish_minus(ch: &ChannelPair, p: f64, start: &CMatrix, tol_nats: f64) -> Option<InnerState> {
    spg_ascent(
        |k| Some(minus_nats(ch, k)),
        |k| grad_minus_nats(ch, k),
        p,
        start,
        tol_nats,
        POLISH_ITERS,
    )
}

fn inner_tolerance(tol: &Tolerance) -> f64 {
    (1e-2 * tol.conv_abs * LN_2).max(1e-15)
}

/// Result of the inner maximization over `K` at fixed `Phi`.
#[derive(Debug, Clone)]
pub struct InnerSolution {
    pub k: CMatrix,
    pub value_bits: f64,
    /// Frank-Wolfe gap in bits, an upper bound on the suboptimality of `value_bits`.
    pub fw_gap_bits: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Maximizes `R+(., Phi)` over `{K >= 0, tr K <= P}` starting from `(P/Nt) I`.
pub fn inner_max_kp(ch: &ChannelPair, phi: &NoiseCrossCov, p: Power, tol: &Tolerance) -> Result<InnerSolution> {
    let start = eye(ch.nt()) * C64::new(p.value() / ch.nt() as f64, 0.0);
    inner_max_kp_from(ch, phi, p, tol, &start)
}

/// As [`inner_max_kp`] with an explicit starting covariance.
pub fn inner_max_kp_from(
    ch: &ChannelPair,
    phi: &NoiseCrossCov,
    p: Power,
    tol: &Tolerance,
    start: &CMatrix,
) -> Result<InnerSolution> {
    check_k(ch, start)?;
    check_phi(ch, phi, tol)?;
    let st = inner_solve(ch, phi.matrix(), p.value(), start, inner_tolerance(tol))
        .ok_or_else(|| Error::SingularNoise(phi.sigma_max()))?;
    Ok(InnerSolution {
        k: st.k,
        value_bits: st.f / LN_2,
        fw_gap_bits: st.fw / LN_2,
        iterations: st.iterations,
        converged: st.converged,
    })
}

/// Output of [`solve_saddle`].
#[derive(Debug, Clone)]
pub struct SaddlePoint {
    /// Optimal transmit covariance.
    pub k: CMatrix,
    /// Optimal noise cross-covariance.
    pub phi: NoiseCrossCov,
    pub capacity_bits: f64,
    /// MMSE coefficient at the saddle.
    pub theta: CMatrix,
    pub power: f64,
    /// Outer iterations.
    pub iterations: usize,
    /// Inner iterations summed over all inner solves.
    pub inner_iterations: usize,
    /// Certified gap `[R+ + FW - max(R-, 0)] / ln 2`.
    pub gap_bits: f64,
    pub rate_plus_bits: f64,
    pub rate_minus_bits: f64,
    pub fw_gap_bits: f64,
    pub converged: bool,
    /// Capacity was decided by the generalized-singular-value test alone.
    pub zero_capacity_shortcut: bool,
}

fn zero_capacity_point(ch: &ChannelPair, p: f64, tol: &Tolerance) -> SaddlePoint {
    let nt = ch.nt();
    let phi = spectral_ball_project(&(ch.hr() * pinv(ch.he(), tol)), 1.0);
    SaddlePoint {
        k: CMatrix::zeros(nt, nt),
        theta: phi.clone(),
        phi: NoiseCrossCov(phi),
        capacity_bits: 0.0,
        power: p,
        iterations: 0,
        inner_iterations: 0,
        gap_bits: 0.0,
        rate_plus_bits: 0.0,
        rate_minus_bits: 0.0,
        fw_gap_bits: 0.0,
        converged: true,
        zero_capacity_shortcut: true,
    }
}

struct UpperBound {
    v: f64,
    fw: f64,
    phi: CMatrix,
}

impl UpperBound {
    /// Records the bound at `phi` and returns the certified gap in bits.
    fn certify(&mut self, phi: &CMatrix, v: f64, fw: f64, rm: f64) -> f64 {
        if v + fw < self.v + self.fw {
            *self = UpperBound { v, fw, phi: phi.clone() };
        }
        (self.v + self.fw - rm.max(0.0)) / LN_2
    }
}

/// Solver knobs beyond the numerical tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Return immediately when `sigma_max(Hr, He) <= 1`.
    pub zero_capacity_shortcut: bool,
    pub max_outer: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            zero_capacity_shortcut: true,
            max_outer: MAX_OUTER,
        }
    }
}

/// Solves `min_Phi max_K R+(K, Phi)`.
pub fn solve_saddle(ch: &ChannelPair, p: Power, tol: &Tolerance) -> Result<SaddlePoint> {
    solve_saddle_with(ch, p, tol, &SolveOptions::default())
}

pub fn solve_saddle_with(
    ch: &ChannelPair,
    p: Power,
    tol: &Tolerance,
    opts: &SolveOptions,
) -> Result<SaddlePoint> {
    let pw = p.value();
    if opts.zero_capacity_shortcut && sigma_max(ch, tol) <= 1.0 + tol.rank_rel {
        return Ok(zero_capacity_point(ch, pw, tol));
    }
    let (nr, ne, nt) = (ch.nr(), ch.ne(), ch.nt());
    let radius = 1.0 - tol.psd_margin;
    let itol = inner_tolerance(tol);
    let fail = || Error::SingularNoise(radius);

    let mut phi = CMatrix::zeros(nr, ne);
    let start = eye(nt) * C64::new(pw / nt as f64, 0.0);
    // The certificate stays valid for inexact inner solves, so their accuracy tracks the gap.
    let mut sharpen = 1.0;
    let adaptive = |gap_bits: f64, sharpen: f64| (INNER_GAP_FRACTION * sharpen * gap_bits * LN_2).max(itol);
    let st = inner_solve(ch, &phi, pw, &start, adaptive(INITIAL_GAP_BITS, sharpen)).ok_or_else(fail)?;
    let mut inner_total = st.iterations;
    let (mut k, mut v, mut fw) = (st.k, st.f, st.fw);
    let mut g = grad_phi_nats(ch, &k, &phi).ok_or_else(fail)?;
    let mut alpha = 1.0;
    let mut hist = vec![v];

    // Every iterate gives an upper bound `v + fw`; keep the best one.
    let mut up = UpperBound { v, fw, phi: phi.clone() };
    // Best lower-bound witness seen so far.
    let mut k_low = k.clone();
    let mut rm = minus_nats(ch, &k);
    let mut gap = up.certify(&phi, v, fw, rm);
    let polish = |from: &CMatrix, k_low: &mut CMatrix, rm: &mut f64, inner_total: &mut usize| {
        if let Some(st) = polish_minus(ch, pw, from, itol) {
            *inner_total += st.iterations;
            if st.f > *rm {
                *rm = st.f;
                *k_low = st.k;
            }
        }
    };
    // Tightens the inner accuracy; false once it is at the floor.
    let refine = |sharpen: &mut f64, gap: f64| {
        if adaptive(gap, *sharpen) <= itol {
            return false;
        }
        *sharpen *= 1e-2;
        true
    };
    let mut outer = 0;
    let mut converged = gap <= tol.conv_abs;
    let (mut best_gap, mut best_v, mut best_rm, mut best_at) = (gap, v, rm, 0);
    while !converged && outer < opts.max_outer && outer - best_at <= STALL_OUTER {
        outer += 1;
        let trial = spectral_ball_project(&(&phi - &g * C64::new(alpha, 0.0)), radius);
        let d = trial - &phi;
        let gd = inner(&g, &d);
        let fref = hist[hist.len().saturating_sub(NONMONOTONE_WINDOW)..]
            .iter()
            .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut t = 1.0;
        let mut accepted = None;
        while t >= MIN_STEP {
            let pn = &phi + &d * C64::new(t, 0.0);
            if let Some(sn) = inner_solve(ch, &pn, pw, &k, adaptive(gap, sharpen)) {
                inner_total += sn.iterations;
                if sn.f <= fref + ARMIJO_C * t * gd {
                    accepted = Some((pn, sn));
                    break;
                }
            }
            t *= BACKTRACK;
        }
        let Some((pn, sn)) = accepted else {
            // Noisy inner values or an overlong step: refine the current point, then
            // restart the step length.
            if !refine(&mut sharpen, gap) {
                alpha *= 1e-4;
                if alpha < 1e-12 {
                    break;
                }
                continue;
            }
            let st = inner_solve(ch, &phi, pw, &k, adaptive(gap, sharpen)).ok_or_else(fail)?;
            inner_total += st.iterations;
            (k, v, fw) = (st.k, st.f, st.fw);
            g = grad_phi_nats(ch, &k, &phi).ok_or_else(fail)?;
            (hist, alpha, best_at) = (vec![v], 1.0, outer);
            gap = up.certify(&phi, v, fw, rm);
            converged = gap <= tol.conv_abs;
            continue;
        };
        let gn = grad_phi_nats(ch, &sn.k, &pn).ok_or_else(fail)?;
        let s = &pn - &phi;
        let y = &gn - &g;
        let sy = inner(&s, &y);
        alpha = if sy > 0.0 { inner(&s, &s) / sy } else { alpha * 1e3 };
        alpha = alpha.clamp(1e-12, 1e12);
        phi = pn;
        k = sn.k;
        v = sn.f;
        fw = sn.fw;
        g = gn;
        hist.push(v);
        let rk = minus_nats(ch, &k);
        if rk >= rm {
            rm = rk;
            k_low = k.clone();
        }
        gap = up.certify(&phi, v, fw, rm);
        if gap > tol.conv_abs && outer % POLISH_EVERY == 0 {
            polish(&k, &mut k_low, &mut rm, &mut inner_total);
            gap = up.certify(&phi, v, fw, rm);
        }
        converged = gap <= tol.conv_abs;
        let moved = |a: f64, b: f64| a - b > PROGRESS_RTOL * b.abs().max(1.0);
        if gap < 0.9 * best_gap || moved(best_v, v) || moved(rm, best_rm) {
            (best_gap, best_v, best_rm, best_at) = (gap.min(best_gap), v.min(best_v), rm, outer);
        } else if !converged && outer - best_at >= SHARPEN_AFTER && refine(&mut sharpen, gap) {
            // Progress stalled at the current inner accuracy.
            let st = inner_solve(ch, &phi, pw, &k, adaptive(gap, sharpen)).ok_or_else(fail)?;
            inner_total += st.iterations;
            (k, v, fw) = (st.k, st.f, st.fw);
            g = grad_phi_nats(ch, &k, &phi).ok_or_else(fail)?;
            (hist, best_at) = (vec![v], outer);
            gap = up.certify(&phi, v, fw, rm);
            converged = gap <= tol.conv_abs;
        }
    }
    if !converged {
        let from = k.clone();
        polish(&from, &mut k_low, &mut rm, &mut inner_total);
        let from = k_low.clone();
        polish(&from, &mut k_low, &mut rm, &mut inner_total);
        gap = up.certify(&phi, v, fw, rm);
        converged = gap <= tol.conv_abs;
    }
    let k = k_low;

    let UpperBound { v, fw, phi } = up;
    let theta = theta_raw(ch, &k, &phi).0;
    Ok(SaddlePoint {
        capacity_bits: (rm / LN_2).max(0.0),
        theta,
        power: pw,
        iterations: outer,
        inner_iterations: inner_total,
        gap_bits: gap,
        rate_plus_bits: v / LN_2,
        rate_minus_bits: rm / LN_2,
        fw_gap_bits: fw / LN_2,
        converged,
        zero_capacity_shortcut: false,
        k,
        phi: NoiseCrossCov(phi),
    })
}

/// Channel seen through the non-degenerate part of a (near-)singular `Phi`.
#[derive(Debug, Clone)]
pub struct SingularNoiseReduction {
    /// `(U2^H Hr, He)`; `None` when every singular value of `Phi` is unit.
    pub reduced: Option<ChannelPair>,
    /// `U2^H Phi`, strictly inside the unit ball.
    pub phi: Option<NoiseCrossCov>,
    /// `T = U1^H Hr - V1^H He`.
    pub t: CMatrix,
    pub unit_count: usize,
    stacked: CMatrix,
    threshold: f64,
}

impl SingularNoiseReduction {
    /// Whether `I(x; yr | ye)` is infinite at `K`, i.e. `T K T^H != 0`.
    pub fn is_infinite(&self, k: &CMatrix) -> bool {
        if self.unit_count == 0 {
            return false;
        }
        let s = psd_factor(k);
        let ts = (&self.t * &s).norm();
        ts > self.threshold * (&self.stacked * &s).norm()
    }

    /// `R+` in bits, `+inf` when the predicate holds.
    pub fn rate_plus(&self, k: &CMatrix) -> f64 {
        if self.is_infinite(k) {
            return f64::INFINITY;
        }
        match (&self.reduced, &self.phi) {
            (Some(ch), Some(phi)) => plus_nats(ch, k, phi.matrix()).map_or(f64::INFINITY, |v| v / LN_2),
            _ => 0.0,
        }
    }
}

/// Splits `Phi` into unit and sub-unit singular directions.
pub fn reduce_singular_noise(ch: &ChannelPair, phi: &NoiseCrossCov, tol: &Tolerance) -> SingularNoiseReduction {
    let m = phi.matrix();
    let svd = full_svd(m);
    let (u, v) = (&svd.u, &svd.v);
    let cut = 1.0 - 10.0 * tol.psd_margin;
    let unit: Vec<usize> = (0..m.nrows().min(m.ncols()))
        .filter(|&i| svd.s[i] >= cut)
        .collect();
    let nr = ch.nr();
    let mut u1 = CMatrix::zeros(nr, unit.len());
    let mut v1 = CMatrix::zeros(ch.ne(), unit.len());
    for (j, &i) in unit.iter().enumerate() {
        u1.set_column(j, &u.column(i));
        v1.set_column(j, &v.column(i));
    }
    let t = u1.adjoint() * ch.hr() - v1.adjoint() * ch.he();
    let u2 = crate::matrix_core::orthogonal_complement(&u1);
    let (reduced, phi_r) = if u2.ncols() == 0 {
        (None, None)
    } else {
        let hr = u2.adjoint() * ch.hr();
        let pr = u2.adjoint() * m;
        (
            Some(ChannelPair::new(hr, ch.he().clone()).expect("shapes are consistent")),
            Some(NoiseCrossCov(pr)),
        )
    };
    SingularNoiseReduction {
        reduced,
        phi: phi_r,
        t,
        unit_count: unit.len(),
        stacked: ch.stacked(),
        threshold: tol.rank_rel.sqrt(),
    }
}

/// `R+` in bits for any `Phi` in the closed ball; `+inf` where it diverges.
pub fn rate_plus_extended(ch: &ChannelPair, k: &CMatrix, phi: &NoiseCrossCov, tol: &Tolerance) -> Result<f64> {
    match rate_plus(ch, k, phi, tol) {
        Err(Error::SingularNoise(_)) => Ok(reduce_singular_noise(ch, phi, tol).rate_plus(k)),
        other => other,
    }
}

/// Optimality residuals of a saddle point.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KktReport {
    /// Largest violation (bits) of the two saddle inequalities over the probes.
    pub saddle_resid: f64,
    /// `||Phi^H Hr S - He S|| / ||He S||` with `K = S S^H`; 0 when capacity is 0.
    pub degraded_resid: f64,
    /// `|R+(K, Phi) - R-(K)|` in bits.
    pub gap_bits: f64,
    /// `Hr = Theta He` up to `sqrt(rank_rel)` relative error.
    pub zero_cap: bool,
    pub probes: usize,
}

fn complex_gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMatrix {
    let sc = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(r, c, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(sc * re, sc * im)
    })
}

/// Checks the saddle inequalities, degradedness and the zero-capacity identity.
pub fn verify_saddle(
    ch: &ChannelPair,
    sp: &SaddlePoint,
    probes: usize,
    seed: u64,
    tol: &Tolerance,
) -> Result<KktReport> {
    let (nr, ne, nt) = (ch.nr(), ch.ne(), ch.nt());
    let p = sp.power;
    let radius = 1.0 - tol.psd_margin;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = rate_plus_extended(ch, &sp.k, &sp.phi, tol)?;
    let mut worst = 0.0f64;
    for i in 0..probes {
        let u: f64 = rng.random_range(0.0..1.0);
        let kp = if i % 2 == 0 {
            let g = complex_gaussian(&mut rng, nt, nt);
            let m = &g * g.adjoint();
            let tr = m.trace().re.max(f64::MIN_POSITIVE);
            m * C64::new(u * p / tr, 0.0)
        } else {
            let h = hermitian_part(&complex_gaussian(&mut rng, nt, nt));
            psd_project(&(&sp.k + h * C64::new(0.1 * u * p, 0.0)), p)?
        };
        let rp = rate_plus_extended(ch, &kp, &sp.phi, tol)?;
        worst = worst.max(rp - base);

        let v: f64 = rng.random_range(0.0..1.0);
        let php = if i % 2 == 0 {
            let g = complex_gaussian(&mut rng, nr, ne);
            let n = spectral_norm(&g).max(f64::MIN_POSITIVE);
            g * C64::new(v * radius / n, 0.0)
        } else {
            let g = complex_gaussian(&mut rng, nr, ne);
            spectral_ball_project(&(sp.phi.matrix() + g * C64::new(0.1 * v, 0.0)), radius)
        };
        let rq = rate_plus(ch, &sp.k, &NoiseCrossCov(php), tol)?;
        worst = worst.max(base - rq);
    }

    let degraded_resid = if sp.capacity_bits <= tol.conv_abs {
        0.0
    } else {
        let (vals, vecs) = hermitian_eigen(&sp.k);
        let lmax = vals.last().copied().unwrap_or(0.0);
        let keep: Vec<usize> = (0..nt).filter(|&i| vals[i] > tol.rank_rel * lmax && vals[i] > 0.0).collect();
        let mut s = CMatrix::zeros(nt, keep.len());
        for (j, &i) in keep.iter().enumerate() {
            s.set_column(j, &(vecs.column(i) * C64::new(vals[i].sqrt(), 0.0)));
        }
        let hs = ch.he() * &s;
        let rs = ch.hr() * &s;
        let num = (sp.phi.matrix().adjoint() * &rs - &hs).norm();
        let den = if hs.norm() > tol.rank_rel * rs.norm() { hs.norm() } else { rs.norm() };
        if den > 0.0 { num / den } else { 0.0 }
    };

    let rm = minus_nats(ch, &sp.k) / LN_2;
    let hr_norm = ch.hr().norm();
    let zero_resid = (ch.hr() - &sp.theta * ch.he()).norm();
    Ok(KktReport {
        saddle_resid: worst.max(0.0),
        degraded_resid,
        gap_bits: (base - rm).abs(),
        zero_cap: zero_resid <= tol.rank_rel.sqrt() * hr_norm,
        probes,
    })
}
