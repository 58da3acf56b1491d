//! High-SNR capacity, the covariance that achieves it, the masked-MIMO baseline
//! and the exact zero-capacity test.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::gsvd::{gsvd, null_projector_he, sigma_max, ChannelPair, GsvdResult, SubspaceDims};
use crate::matrix_core::{
    chol, full_svd, hermitian_part, logdet_chol, rank, spectral_norm, CMatrix, Tolerance, C64,
};
use crate::secrecy_capacity::Power;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum HighSnrCase {
    FullColumnRankHe,
    RankDeficientHe,
}

/// High-SNR capacity `C0 + sum_{sigma >= 1} log2 sigma^2`, evaluated at finite `P`
/// with the vanishing term dropped.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HighSnrBreakdown {
    pub c0_bits: f64,
    pub gsv_sum_bits: f64,
    pub total_bits: f64,
    pub case: HighSnrCase,
    /// `He` is rank deficient but no receiver-only direction exists, so `C0` is taken as 0.
    pub c0_degenerate: bool,
    pub dims: SubspaceDims,
}

pub fn high_snr_capacity(ch: &ChannelPair, p: Power, tol: &Tolerance) -> HighSnrBreakdown {
    let g = gsvd(ch, tol);
    high_snr_from_gsvd(ch, &g, p)
}

pub fn high_snr_from_gsvd(ch: &ChannelPair, g: &GsvdResult, p: Power) -> HighSnrBreakdown {
    let dims = g.dims;
    let gsv_sum_bits: f64 = g.sigma.iter().filter(|&&s| s >= 1.0).map(|s| 2.0 * s.log2()).sum();
    let full = dims.k - dims.p == ch.nt();
    let (case, c0_bits, c0_degenerate) = if full {
        (HighSnrCase::FullColumnRankHe, 0.0, false)
    } else if dims.p == 0 {
        (HighSnrCase::RankDeficientHe, 0.0, true)
    } else {
        let proj = null_projector_he(g);
        let hr = ch.hr();
        let m = CMatrix::identity(ch.nr(), ch.nr())
            + hr * proj * hr.adjoint() * C64::new(p.value() / dims.p as f64, 0.0);
        let c0 = logdet_chol(&hermitian_part(&m)).unwrap_or(f64::NAN) / LN_2;
        (HighSnrCase::RankDeficientHe, c0, false)
    };
    HighSnrBreakdown {
        c0_bits,
        gsv_sum_bits,
        total_bits: c0_bits + gsv_sum_bits,
        case,
        c0_degenerate,
        dims,
    }
}

/// Transmit covariance of the constructive high-SNR scheme.
///
/// Shared directions with `sigma > 1` carry independent streams precoded by
/// `Psi_t Omega`; in the rank-deficient case the receiver-only directions carry
/// `P - sqrt(P)` and the shared streams share `sqrt(P)`.
pub fn achievability_covariance(g: &GsvdResult, p: Power) -> CMatrix {
    let SubspaceDims { k, p: pd, s } = g.dims;
    let e = k - pd - s;
    let nt = g.nt;
    let pw = p.value();
    let active: Vec<usize> = (0..s).filter(|&j| g.sigma[j] > 1.0).collect();
    let mut inner = CMatrix::zeros(nt, nt);

    if k == nt && pd == 0 {
        let om_norm = spectral_norm(&g.omega);
        if !active.is_empty() && om_norm > 0.0 {
            let alpha = 1.0 / (nt as f64 * om_norm * om_norm);
            let mut d = CMatrix::zeros(k, k);
            for &j in &active {
                d[(e + j, e + j)] = C64::new(alpha * pw, 0.0);
            }
            let x = &g.omega * d * g.omega.adjoint();
            inner.view_mut((0, 0), (k, k)).copy_from(&x);
        }
    } else {
        let p_r = if pd > 0 { (pw - pw.sqrt()).max(0.0) } else { 0.0 };
        let p_re = pw.sqrt().min(pw - p_r);
        let om2 = g.omega_shared();
        let om_norm = spectral_norm(&om2);
        if !active.is_empty() && om_norm > 0.0 {
            let alpha = 1.0 / (nt as f64 * om_norm * om_norm);
            let mut d = CMatrix::zeros(s, s);
            for &j in &active {
                d[(j, j)] = C64::new(alpha * p_re, 0.0);
            }
            let x = &om2 * d * om2.adjoint();
            inner.view_mut((e, e), (s, s)).copy_from(&x);
        }
        for j in 0..pd {
            inner[(e + s + j, e + s + j)] = C64::new(p_r / pd as f64, 0.0);
        }
    }
    hermitian_part(&(&g.psi_t * inner * g.psi_t.adjoint()))
}

/// Masked-MIMO rate and its independent cross-evaluation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MaskedRate {
    pub rate_bits: f64,
    /// `I(u; yr) - I(u; ye)` from the two mutual-information terms.
    pub cross_check_bits: f64,
    pub delta_bits: f64,
}

fn masked_precondition(ch: &ChannelPair, tol: &Tolerance) -> Result<()> {
    let (nr, nt, ne) = (ch.nr(), ch.nt(), ch.ne());
    if !(nr <= nt && nt <= ne) {
        return Err(Error::PreconditionViolated(format!(
            "masked MIMO needs Nr <= Nt <= Ne, got Nr={nr}, Nt={nt}, Ne={ne}"
        )));
    }
    if rank(ch.hr(), tol) != nr {
        return Err(Error::PreconditionViolated("Hr must have full row rank".into()));
    }
    if rank(ch.he(), tol) != nt {
        return Err(Error::PreconditionViolated("He must have full column rank".into()));
    }
    Ok(())
}

/// Rate of isotropic signalling on `Null(Hr)^perp` with synthetic noise on `Null(Hr)`.
pub fn masked_mimo_rate(ch: &ChannelPair, p: Power, tol: &Tolerance) -> Result<MaskedRate> {
    masked_precondition(ch, tol)?;
    let (nr, nt) = (ch.nr(), ch.nt());
    let pt = p.value() / nt as f64;
    let svd = full_svd(ch.hr());
    let vr = svd.v.columns(0, nr).into_owned();
    let sig: Vec<f64> = svd.s[..nr].to_vec();
    let he = ch.he();
    let b = hermitian_part(&(CMatrix::identity(nt, nt) + he.adjoint() * he * C64::new(pt, 0.0)));
    let bc = chol(&b).ok_or(Error::NotPositiveDefinite)?;
    let hr = ch.hr();
    let hbh = hermitian_part(&(hr * bc.solve(&hr.adjoint())));
    let first: f64 = sig.iter().map(|s| (pt + 1.0 / (s * s)).ln()).sum::<f64>()
        + logdet_chol(&hbh).ok_or(Error::NotPositiveDefinite)?;
    let iuyr: f64 = sig.iter().map(|s| (1.0 + pt * s * s).ln()).sum();
    let vbv = hermitian_part(&(vr.adjoint() * bc.solve(&vr)));
    let iuye = -logdet_chol(&vbv).ok_or(Error::NotPositiveDefinite)?;
    debug_assert_eq!(vr.ncols(), nr);
    let rate_bits = first / LN_2;
    let cross_check_bits = (iuyr - iuye) / LN_2;
    let delta_bits = (rate_bits - cross_check_bits).abs();
    if delta_bits > 1e-9 * rate_bits.abs().max(1.0) {
        return Err(Error::CrossCheckMismatch(format!(
            "masked rate {rate_bits} vs {cross_check_bits}"
        )));
    }
    Ok(MaskedRate {
        rate_bits,
        cross_check_bits,
        delta_bits,
    })
}

/// High-SNR loss of the masked scheme: `sum_{sigma < 1} log2(1 / sigma^2)`.
pub fn masked_mimo_gap(ch: &ChannelPair, tol: &Tolerance) -> Result<f64> {
    masked_precondition(ch, tol)?;
    let g = gsvd(ch, tol);
    Ok(g.sigma.iter().filter(|&&s| s < 1.0).map(|s| -2.0 * s.log2()).sum())
}

/// Exact zero-capacity test: `sigma_max(Hr, He) <= 1`.
pub fn is_zero_capacity(ch: &ChannelPair, tol: &Tolerance) -> bool {
    sigma_max(ch, tol) <= 1.0 + tol.rank_rel
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix_core::{from_real, identity, real_diag};
    use crate::secrecy_capacity::rate_minus;

    fn pw(x: f64) -> Power {
        Power::new(x).unwrap()
    }

    #[test]
    fn high_snr_examples() {
        let tol = Tolerance::default();
        let ch = ChannelPair::new(real_diag(&[2.0, 0.5]), identity(2)).unwrap();
        let b = high_snr_capacity(&ch, pw(10.0), &tol);
        assert_eq!(b.case, HighSnrCase::FullColumnRankHe);
        assert_eq!(b.c0_bits, 0.0);
        assert!((b.gsv_sum_bits - 2.0).abs() < 1e-12);

        let ch = ChannelPair::new(identity(2), from_real(1, 2, &[1.0, 0.0])).unwrap();
        let b = high_snr_capacity(&ch, pw(3.0), &tol);
        assert_eq!(b.case, HighSnrCase::RankDeficientHe);
        assert!((b.c0_bits - 2.0).abs() < 1e-12);
        assert!(b.gsv_sum_bits.abs() < 1e-12);

        let h = from_real(2, 2, &[1.0, 0.3, -0.2, 2.0]);
        let ch = ChannelPair::new(h.clone(), h).unwrap();
        assert!(high_snr_capacity(&ch, pw(1e3), &tol).total_bits.abs() < 1e-9);
    }

    #[test]
    fn achievability_examples() {
        let tol = Tolerance::default();
        let ch = ChannelPair::new(real_diag(&[2.0, 0.5]), identity(2)).unwrap();
        let g = gsvd(&ch, &tol);
        let k = achievability_covariance(&g, pw(100.0));
        assert!(k[(1, 1)].norm() < 1e-12 && k[(0, 0)].re > 0.0);
        assert!(k.trace().re <= 100.0 * (1.0 + 1e-12));
        let r = rate_minus(&ch, &achievability_covariance(&g, pw(1e4))).unwrap();
        assert!((r - 2.0).abs() < 0.1);

        let ch = ChannelPair::new(real_diag(&[0.5, 1.0]), identity(2)).unwrap();
        let g = gsvd(&ch, &tol);
        assert!(achievability_covariance(&g, pw(10.0)).norm() < 1e-15);
    }

    #[test]
    fn achievability_rank_deficient() {
        let tol = Tolerance::default();
        let ch = ChannelPair::new(identity(2), from_real(1, 2, &[1.0, 0.0])).unwrap();
        let g = gsvd(&ch, &tol);
        let p = pw(1e4);
        let k = achievability_covariance(&g, p);
        assert!(k.trace().re <= 1e4 * (1.0 + 1e-12));
        let r = rate_minus(&ch, &k).unwrap();
        let h = high_snr_capacity(&ch, p, &tol).total_bits;
        assert!((r - h).abs() < 0.2, "{r} vs {h}");
        let k = achievability_covariance(&g, pw(0.25));
        assert!(k.trace().re <= 0.25 * (1.0 + 1e-12));
    }

    #[test]
    fn masked_examples() {
        let tol = Tolerance::default();
        let ch = ChannelPair::new(from_real(1, 1, &[2.0]), from_real(1, 1, &[1.0])).unwrap();
        let m = masked_mimo_rate(&ch, pw(1.0), &tol).unwrap();
        assert!((m.rate_bits - 2.5f64.log2()).abs() < 1e-12);
        assert!(m.delta_bits < 1e-9);

        let ch = ChannelPair::new(real_diag(&[2.0, 0.5]), identity(2)).unwrap();
        let m = masked_mimo_rate(&ch, pw(1e6), &tol).unwrap();
        assert!(m.rate_bits.abs() < 1e-4);
        assert!((masked_mimo_gap(&ch, &tol).unwrap() - 2.0).abs() < 1e-12);

        let ch = ChannelPair::new(identity(3), identity(3)).unwrap();
        assert!(masked_mimo_rate(&ch, pw(5.0), &tol).unwrap().rate_bits.abs() < 1e-12);
        let ch = ChannelPair::new(real_diag(&[2.0, 3.0]), identity(2)).unwrap();
        assert_eq!(masked_mimo_gap(&ch, &tol).unwrap(), 0.0);
        let ch = ChannelPair::new(real_diag(&[0.1, 10.0]), identity(2)).unwrap();
        assert!((masked_mimo_gap(&ch, &tol).unwrap() - 100f64.log2()).abs() < 1e-10);
    }

    #[test]
    fn masked_preconditions() {
        let tol = Tolerance::default();
        let ch = ChannelPair::new(identity(2), from_real(1, 2, &[1.0, 0.0])).unwrap();
        assert!(matches!(masked_mimo_rate(&ch, pw(1.0), &tol), Err(Error::PreconditionViolated(_))));
        assert!(matches!(masked_mimo_gap(&ch, &tol), Err(Error::PreconditionViolated(_))));
    }

    #[test]
    fn zero_capacity_examples() {
        let tol = Tolerance::default();
        let h = from_real(2, 2, &[1.0, 0.3, -0.2, 2.0]);
        assert!(is_zero_capacity(&ChannelPair::new(h.clone(), h.clone()).unwrap(), &tol));
        let ch = ChannelPair::new(&h * C64::new(2.0, 0.0), h).unwrap();
        assert!(!is_zero_capacity(&ch, &tol));
    }
}
