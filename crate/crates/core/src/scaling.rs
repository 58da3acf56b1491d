//! Many-antenna scaling laws for i.i.d. Rayleigh channels.
//!
//! With `beta = Nt / Ne` and `gamma = Nr / Ne` fixed as `Ne` grows, the secrecy
//! capacity vanishes almost surely inside the region
//! `beta <= 1/2, gamma <= (1 - sqrt(2 beta))^2`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gsvd::{sigma_max, ChannelPair};
use crate::matrix_core::{CMatrix, Tolerance, C64};

const REGION_SLACK: f64 = 1e-12;
const INTERVAL_TOL: f64 = 1e-12;

/// Asymptotic largest generalized singular value statistic for ratios `(beta, gamma)`.
pub fn asymptotic_sigma_max(beta: f64, gamma: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::DomainError(format!("beta = {beta} must lie in [0, 1)")));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::DomainError(format!("gamma = {gamma} must be positive")));
    }
    let inner = 1.0 - (1.0 - beta) * (1.0 - beta / gamma);
    let t = (1.0 + inner.max(0.0).sqrt()) / (1.0 - beta);
    Ok(gamma * t * t)
}

/// Frontier of the zero-capacity region, `gamma = (1 - sqrt(2 beta))^2`.
pub fn frontier_gamma(beta: f64) -> f64 {
    let u = 1.0 - (2.0 * beta).sqrt();
    u * u
}

fn in_region_exact(beta: f64, gamma: f64) -> bool {
    beta <= 0.5 && gamma <= frontier_gamma(beta)
}

/// `beta <= 1/2` and `gamma <= (1 - sqrt(2 beta))^2`, closed (boundary included).
pub fn zero_cap_region(beta: f64, gamma: f64) -> bool {
    beta <= 0.5 + REGION_SLACK && gamma <= frontier_gamma(beta.min(0.5)) + REGION_SLACK
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScalingPoint {
    pub beta: f64,
    pub gamma: f64,
    pub sigma_max_asymptotic: f64,
    pub in_zero_region: bool,
}

pub fn scaling_point(beta: f64, gamma: f64) -> Result<ScalingPoint> {
    Ok(ScalingPoint {
        beta,
        gamma,
        sigma_max_asymptotic: asymptotic_sigma_max(beta, gamma)?,
        in_zero_region: zero_cap_region(beta, gamma),
    })
}

/// `(beta, gamma)` pairs along the frontier.
pub fn frontier(beta_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    beta_grid
        .iter()
        .map(|&b| {
            if (0.0..=0.5).contains(&b) {
                Ok((b, frontier_gamma(b)))
            } else {
                Err(Error::DomainError(format!("beta = {b} outside [0, 1/2]")))
            }
        })
        .collect()
}

/// Evenly spaced frontier with `points` rows from `(0, 1)` to `(1/2, 0)`.
pub fn frontier_points(points: usize) -> Vec<(f64, f64)> {
    match points {
        0 => Vec::new(),
        1 => vec![(0.0, 1.0)],
        n => (0..n)
            .map(|i| {
                let b = if i + 1 == n { 0.5 } else { 0.5 * i as f64 / (n - 1) as f64 };
                (b, frontier_gamma(b))
            })
            .collect(),
    }
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Minimizes `w_beta * beta + w_gamma * gamma` over the closed zero-capacity region.
///
/// The minimizer lies on the frontier; golden-section search locates it and a
/// bisection on the sign of the derivative along the frontier refines it, since
/// function values alone cannot resolve a flat minimum below `sqrt(eps)`.
pub fn optimal_allocation_weighted(w_beta: f64, w_gamma: f64) -> Result<(f64, f64)> {
    if !(w_beta > 0.0 && w_gamma > 0.0) {
        return Err(Error::DomainError("weights must be positive".into()));
    }
    let f = |b: f64| w_beta * b + w_gamma * frontier_gamma(b);
    let df = |b: f64| {
        let u = (2.0 * b).sqrt();
        if u == 0.0 {
            f64::NEG_INFINITY
        } else {
            w_beta - 2.0 * w_gamma * (1.0 - u) / u
        }
    };
    let coarse = golden_section(f, 0.0, 0.5, INTERVAL_TOL);
    let width = 1e-4;
    let (mut lo, mut hi) = ((coarse - width).max(0.0), (coarse + width).min(0.5));
    let beta = if df(lo) < 0.0 && df(hi) > 0.0 {
        while hi - lo > f64::EPSILON * hi {
            let mid = 0.5 * (lo + hi);
            if df(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    } else {
        coarse
    };
    Ok((beta, frontier_gamma(beta)))
}

/// Antenna ratios minimizing `beta + gamma` over the zero-capacity region.
pub fn optimal_allocation() -> (f64, f64) {
    optimal_allocation_weighted(1.0, 1.0).expect("unit weights are valid")
}

/// Smallest `Ne / T` that zeroes the capacity when `Nt = tau T` and `Nr = (1 - tau) T`.
pub fn min_eavesdropper_ratio(tx_fraction: f64) -> Result<f64> {
    let tau = tx_fraction;
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::DomainError(format!("tx fraction {tau} outside (0, 1)")));
    }
    let inside = |rho: f64| in_region_exact(tau / rho, (1.0 - tau) / rho);
    let mut lo = 0.0;
    let mut hi = 1.0;
    while !inside(hi) {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > INTERVAL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if inside(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Summary of a Monte Carlo run over i.i.d. `CN(0, 1)` channel pairs.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct McSummary {
    pub nt: usize,
    pub nr: usize,
    pub ne: usize,
    pub trials: usize,
    pub seed: u64,
    /// Mean over trials with finite `sigma_max`; `None` when there are none.
    pub empirical_sigma_max_mean: Option<f64>,
    pub empirical_sigma_max_sd: Option<f64>,
    /// Fraction of trials with `sigma_max <= 1`.
    pub zero_cap_fraction: f64,
    /// Fraction of trials with a receiver-only direction (`sigma_max` infinite).
    pub infinite_fraction: f64,
}

fn gaussian_matrix(rng: &mut ChaCha20Rng, r: usize, c: usize) -> CMatrix {
    let sc = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(r, c, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(sc * re, sc * im)
    })
}

fn stream(seed: u64, trial: usize, tag: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream((trial as u64) << 1 | tag);
    rng
}

/// The channel pair drawn for `(seed, trial)`; `Hr` and `He` use separate streams.
pub fn random_channel(nt: usize, nr: usize, ne: usize, seed: u64, trial: usize) -> ChannelPair {
    let hr = gaussian_matrix(&mut stream(seed, trial, 0), nr, nt);
    let he = gaussian_matrix(&mut stream(seed, trial, 1), ne, nt);
    ChannelPair::new(hr, he).expect("nonempty finite matrices")
}

pub fn monte_carlo_sigma_max(
    nt: usize,
    nr: usize,
    ne: usize,
    trials: usize,
    seed: u64,
    tol: &Tolerance,
) -> Result<McSummary> {
    if trials == 0 || nt == 0 || nr == 0 || ne == 0 {
        return Err(Error::DomainError("trials and antenna counts must be positive".into()));
    }
    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| sigma_max(&random_channel(nt, nr, ne, seed, t), tol))
        .collect();
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let (mean, sd) = if finite.is_empty() {
        (None, None)
    } else {
        let n = finite.len() as f64;
        let m = finite.iter().sum::<f64>() / n;
        let var = if finite.len() > 1 {
            finite.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        (Some(m), Some(var.sqrt()))
    };
    let count = |pred: &dyn Fn(f64) -> bool| values.iter().filter(|&&v| pred(v)).count() as f64;
    Ok(McSummary {
        nt,
        nr,
        ne,
        trials,
        seed,
        empirical_sigma_max_mean: mean,
        empirical_sigma_max_sd: sd,
        zero_cap_fraction: count(&|v| v <= 1.0 + tol.rank_rel) / trials as f64,
        infinite_fraction: count(&|v| v.is_infinite()) / trials as f64,
    })
}
