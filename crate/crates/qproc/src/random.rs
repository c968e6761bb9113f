//! Seeded random generators for matrices, states, and channels.

use crate::qla::{c, cr, CMatrix};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type Seed = u64;

pub fn rng_from_seed(seed: Seed) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

fn gauss(rng: &mut impl Rng) -> f64 {
    // Box-Muller; good enough for test fixtures
    let u1: f64 = rng.gen_range(1e-12..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn ginibre(rng: &mut impl Rng, rows: usize, cols: usize) -> Vec<Complex64> {
    (0..rows * cols).map(|_| c(gauss(rng), gauss(rng))).collect()
}

/// Dense complex matrix with i.i.d. Gaussian entries (single factor).
pub fn random_square(rng: &mut impl Rng, d: usize) -> CMatrix {
    let data = ginibre(rng, d, d);
    CMatrix::from_slice(&[d], &data).unwrap()
}

pub fn random_hermitian(rng: &mut impl Rng, d: usize) -> CMatrix {
    random_square(rng, d).herm_part()
}

/// Random density matrix from a normalized Wishart sample.
pub fn random_density(rng: &mut impl Rng, d: usize) -> CMatrix {
    let g = random_square(rng, d);
    let w = g.mul(&g.dagger());
    let tr = w.trace().re;
    w.scale(cr(1.0 / tr))
}

/// Haar-like random unitary via modified Gram-Schmidt on a Ginibre sample.
pub fn random_unitary(rng: &mut impl Rng, d: usize) -> CMatrix {
    let cols = orthonormal_columns(rng, d, d);
    let mut u = CMatrix::square_zeros(&[d]);
    for (j, col) in cols.iter().enumerate() {
        for i in 0..d {
            u.set(i, j, col[i]);
        }
    }
    u
}

/// `ncols` orthonormal columns of length `nrows` (requires ncols <= nrows).
pub fn orthonormal_columns(rng: &mut impl Rng, nrows: usize, ncols: usize) -> Vec<Vec<Complex64>> {
    assert!(ncols <= nrows);
    let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(ncols);
    while cols.len() < ncols {
        let mut v: Vec<Complex64> = (0..nrows).map(|_| c(gauss(rng), gauss(rng))).collect();
        for prev in &cols {
            let dot: Complex64 = prev.iter().zip(&v).map(|(p, x)| p.conj() * x).sum();
            for (x, p) in v.iter_mut().zip(prev) {
                *x -= dot * p;
            }
        }
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        for x in v.iter_mut() {
            *x /= cr(norm);
        }
        cols.push(v);
    }
    cols
}

/// Random pure-state ket of dimension d.
pub fn random_ket(rng: &mut impl Rng, d: usize) -> CMatrix {
    let mut v = ginibre(rng, d, 1);
    let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for x in v.iter_mut() {
        *x /= cr(norm);
    }
    let mut m = CMatrix::zeros(&[d], &[1]);
    for i in 0..d {
        m.set(i, 0, v[i]);
    }
    m
}

/// Kraus operators of a random CPTP map of the given Kraus rank, built from a
/// random isometry.
pub fn random_kraus_set(rng: &mut impl Rng, d: usize, rank: usize) -> Vec<CMatrix> {
    let cols = orthonormal_columns(rng, d * rank, d);
    // V[(s, e), s'] = K_e[s][s']
    let mut ks: Vec<CMatrix> = (0..rank).map(|_| CMatrix::square_zeros(&[d])).collect();
    for (sp, col) in cols.iter().enumerate() {
        for s in 0..d {
            for e in 0..rank {
                ks[e].set(s, sp, col[s * rank + e]);
            }
        }
    }
    ks
}
