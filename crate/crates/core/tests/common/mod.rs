#![allow(dead_code)]

use mimome::{CMatrix, ChannelPair, C64};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cgauss(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMatrix {
    CMatrix::from_fn(r, c, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im) / 2f64.sqrt()
    })
}

pub fn random_pair(rng: &mut ChaCha8Rng, nt: usize, nr: usize, ne: usize) -> ChannelPair {
    ChannelPair::new(cgauss(rng, nr, nt), cgauss(rng, ne, nt)).unwrap()
}

/// Random positive definite matrix with the given trace.
pub fn random_pd(rng: &mut ChaCha8Rng, n: usize, trace: f64) -> CMatrix {
    let g = cgauss(rng, n, n);
    let m = &g * g.adjoint() + CMatrix::identity(n, n) * C64::new(0.2, 0.0);
    let t = m.trace().re;
    m * C64::new(trace / t, 0.0)
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let g = cgauss(rng, n, n);
    (&g + g.adjoint()) * C64::new(0.5, 0.0)
}

/// Random matrix with spectral norm exactly `norm`.
pub fn with_norm(rng: &mut ChaCha8Rng, r: usize, c: usize, norm: f64) -> CMatrix {
    let g = cgauss(rng, r, c);
    let s = oracle_singular_values(&g)[0];
    g * C64::new(norm / s, 0.0)
}

/// Eigen-decomposition of the smaller Gram matrix, kept independent of the crate's SVD.
fn gram_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let g = m.adjoint() * m;
    let e = ((&g + g.adjoint()) * C64::new(0.5, 0.0)).symmetric_eigen();
    (e.eigenvalues.iter().copied().collect(), e.eigenvectors)
}

pub fn oracle_singular_values(m: &CMatrix) -> Vec<f64> {
    let t = if m.nrows() < m.ncols() { m.adjoint() } else { m.clone() };
    let mut s: Vec<f64> = gram_eigen(&t).0.iter().map(|l| l.max(0.0).sqrt()).collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

/// Orthogonal projector onto `Null(m)` from the eigenvectors of `m^H m`.
pub fn oracle_null_projector(m: &CMatrix) -> CMatrix {
    let (vals, vecs) = gram_eigen(m);
    let top = vals.iter().fold(0.0f64, |a, &b| a.max(b));
    let n = m.ncols();
    let mut p = CMatrix::zeros(n, n);
    for (j, &l) in vals.iter().enumerate() {
        if l <= 1e-10 * top.max(1e-300) {
            let v = vecs.column(j);
            p += &v * v.adjoint();
        }
    }
    p
}

/// Pseudo-inverse of a matrix with full column or full row rank via the normal equations.
pub fn oracle_pinv(m: &CMatrix) -> CMatrix {
    if m.nrows() >= m.ncols() {
        (m.adjoint() * m).try_inverse().unwrap() * m.adjoint()
    } else {
        m.adjoint() * (m * m.adjoint()).try_inverse().unwrap()
    }
}

/// Scalar `I(x; yr | ye)` in bits for real gains and real noise correlation.
pub fn scalar_rate_plus(hr: f64, he: f64, k: f64, phi: f64) -> f64 {
    let n = 1.0 - phi * phi;
    let d = hr - phi * he;
    ((n + d * d * k / (1.0 + he * he * k)) / n).log2()
}

pub fn scalar_capacity(hr: f64, he: f64, p: f64) -> f64 {
    ((1.0 + p * hr * hr) / (1.0 + p * he * he)).max(1.0).log2()
}

/// Grid min over `phi` of max over `k` of the scalar rate, refined around the best cell.
pub fn scalar_grid_minmax(hr: f64, he: f64, p: f64, nk: usize, nphi: usize, levels: usize) -> f64 {
    let inner = |phi: f64| {
        (0..=nk)
            .map(|i| scalar_rate_plus(hr, he, p * i as f64 / nk as f64, phi))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let (mut lo, mut hi) = (-1.0 + 1e-12, 1.0 - 1e-12);
    let mut best = f64::INFINITY;
    for _ in 0..levels {
        let h = (hi - lo) / nphi as f64;
        let mut arg = lo;
        for j in 0..=nphi {
            let phi = lo + h * j as f64;
            let v = inner(phi);
            if v < best {
                best = v;
                arg = phi;
            }
        }
        lo = (arg - 2.0 * h).max(-1.0 + 1e-12);
        hi = (arg + 2.0 * h).min(1.0 - 1e-12);
    }
    best
}
