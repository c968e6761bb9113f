//! Matrix functions and information measures. All logarithms are natural
//! (nats). Eigenvalues in [-tau, 0] are clamped to 0 before entropies and
//! 0 log 0 := 0.

use super::{cr, decomp::herm_eig, CMatrix, DensityMatrix, TAU_PSD, ZERO};
use crate::error::{Error, Result};

/// Matrix exponential by scaling and squaring with a Taylor kernel.
pub fn expm(m: &CMatrix) -> Result<CMatrix> {
    if !m.is_square() {
        return Err(Error::NotSquare(m.nrows(), m.ncols()));
    }
    let norm = m.max_abs() * m.nrows() as f64;
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = m.scale(cr(1.0 / f64::powi(2.0, s as i32)));
    let mut term = CMatrix::identity(m.rows_dims());
    let mut acc = term.clone();
    for k in 1..=30 {
        term = term.mul(&scaled).scale(cr(1.0 / k as f64));
        acc = acc.add(&term);
        if term.max_abs() < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        acc = acc.mul(&acc);
    }
    Ok(acc)
}

/// Principal matrix logarithm, evaluated on the complex Schur form by inverse
/// scaling and squaring. Fails if any eigenvalue sits on (or within 1e-12 of)
/// the negative real axis, where the principal branch is undefined.
pub fn logm(m: &CMatrix) -> Result<CMatrix> {
    if !m.is_square() {
        return Err(Error::NotSquare(m.nrows(), m.ncols()));
    }
    let n = m.nrows();
    let (q, mut t) = super::decomp::schur(m)?;
    let scale = (0..n).map(|i| t.get(i, i).norm()).fold(0.0, f64::max);
    for i in 0..n {
        let lambda = t.get(i, i);
        if lambda.norm() <= 1e-14 * scale.max(1.0) {
            return Err(Error::LogBranchCut(lambda));
        }
        if lambda.re < 0.0 && lambda.im.abs() <= 1e-12 * lambda.norm().max(1.0) {
            return Err(Error::LogBranchCut(lambda));
        }
    }
    // repeated principal square roots of the triangular factor
    let id = CMatrix::identity(m.rows_dims());
    let mut k = 0u32;
    while t.sub(&id).max_abs() > 0.25 {
        t = sqrt_triangular(&t)?;
        k += 1;
        if k > 60 {
            return Err(Error::NoConvergence("matrix log scaling".into()));
        }
    }
    // log(I + X) via alternating series on the small remainder
    let x = t.sub(&id);
    let mut term = id.clone();
    let mut acc = CMatrix::square_zeros(m.rows_dims());
    for j in 1..=48 {
        term = term.mul(&x);
        let coef = if j % 2 == 1 { 1.0 } else { -1.0 } / j as f64;
        acc = acc.add(&term.scale(cr(coef)));
        if term.max_abs() / (j as f64) < 1e-18 {
            break;
        }
    }
    let logt = acc.scale(cr(f64::powi(2.0, k as i32)));
    Ok(q.mul(&logt).mul(&q.dagger()))
}

/// Principal square root of an upper triangular matrix.
fn sqrt_triangular(t: &CMatrix) -> Result<CMatrix> {
    let n = t.nrows();
    let mut s = CMatrix::square_zeros(t.rows_dims());
    for i in 0..n {
        s.set(i, i, t.get(i, i).sqrt());
    }
    for off in 1..n {
        for i in 0..(n - off) {
            let j = i + off;
            let mut acc = t.get(i, j);
            for k in (i + 1)..j {
                acc -= s.get(i, k) * s.get(k, j);
            }
            let denom = s.get(i, i) + s.get(j, j);
            if denom.norm() < 1e-300 {
                return Err(Error::LogBranchCut(denom));
            }
            s.set(i, j, acc / denom);
        }
    }
    Ok(s)
}

fn clamped_spectrum(rho: &CMatrix, tau: f64) -> Result<(Vec<f64>, CMatrix)> {
    let (evals, vecs) = herm_eig(&rho.herm_part())?;
    let lmax = evals.first().copied().unwrap_or(0.0).max(0.0);
    let mut out = Vec::with_capacity(evals.len());
    for &l in &evals {
        if l < -tau * lmax.max(1.0) {
            return Err(Error::NotPsd(l));
        }
        out.push(l.max(0.0));
    }
    Ok((out, vecs))
}

/// Von Neumann entropy in nats; S(pure) = 0.
pub fn vn_entropy(rho: &DensityMatrix) -> Result<f64> {
    let (evals, _) = clamped_spectrum(rho.mat(), TAU_PSD)?;
    Ok(evals
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| -l * l.ln())
        .sum())
}

/// Entropy of a Hermitian PSD matrix normalized by the caller.
pub fn vn_entropy_mat(rho: &CMatrix) -> Result<f64> {
    let (evals, _) = clamped_spectrum(rho, TAU_PSD)?;
    Ok(evals
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| -l * l.ln())
        .sum())
}

/// Quantum relative entropy S(rho || sigma) in nats. Returns infinity when
/// the support of rho leaks outside the support of sigma.
pub fn q_rel_entropy(rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    if rho.nrows() != sigma.nrows() {
        return Err(Error::DimMismatch(format!(
            "relative entropy needs equal dims, got {} and {}",
            rho.nrows(),
            sigma.nrows()
        )));
    }
    let (rl, _) = clamped_spectrum(rho, TAU_PSD)?;
    let (sl, sv) = clamped_spectrum(sigma, TAU_PSD)?;
    let smax = sl.first().copied().unwrap_or(0.0).max(1e-300);
    // -S(rho)
    let neg_s_rho: f64 = rl
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| l * l.ln())
        .sum();
    // -tr(rho log sigma) via the spectral decomposition of sigma
    let n = sigma.nrows();
    let mut cross = 0.0f64;
    for i in 0..n {
        // weight <v_i| rho |v_i>
        let mut w = ZERO;
        for r in 0..n {
            for s in 0..n {
                w += sv.get(r, i).conj() * rho.get(r, s) * sv.get(s, i);
            }
        }
        let w = w.re.max(0.0);
        if sl[i] <= TAU_PSD * smax {
            if w > 1e-9 {
                return Ok(f64::INFINITY);
            }
            continue;
        }
        cross -= w * sl[i].ln();
    }
    Ok(neg_s_rho + cross)
}

/// Quantum mutual information S(A) + S(B) - S(AB) for the bipartition where
/// `cut_a` lists the factors of subsystem A.
pub fn q_mutual_info(rho_ab: &CMatrix, cut_a: &[usize]) -> Result<f64> {
    let nf = rho_ab.num_factors();
    for &f in cut_a {
        if f >= nf {
            return Err(Error::FactorOutOfRange(f, nf));
        }
    }
    let cut_b: Vec<usize> = (0..nf).filter(|f| !cut_a.contains(f)).collect();
    if cut_a.is_empty() || cut_b.is_empty() {
        return Err(Error::BadParam(
            "mutual information needs a nontrivial bipartition".into(),
        ));
    }
    let ra = rho_ab.partial_trace(cut_a)?;
    let rb = rho_ab.partial_trace(&cut_b)?;
    Ok(vn_entropy_mat(&ra)? + vn_entropy_mat(&rb)? - vn_entropy_mat(rho_ab)?)
}

/// Trace distance with the 1/2 convention: D = ||rho - sigma||_1 / 2.
pub fn trace_distance(rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    if rho.nrows() != sigma.nrows() || rho.ncols() != sigma.ncols() {
        return Err(Error::DimMismatch(format!(
            "trace distance needs equal dims, got {} and {}",
            rho.nrows(),
            sigma.nrows()
        )));
    }
    let diff = rho.sub(sigma).herm_part();
    let (evals, _) = herm_eig(&diff)?;
    Ok(0.5 * evals.iter().map(|l| l.abs()).sum::<f64>())
}

/// tr(rho^2).
pub fn purity(rho: &CMatrix) -> f64 {
    rho.mul(rho).trace().re
}

/// Nuclear (trace) norm ||M||_1 = sum of singular values.
pub fn trace_norm(m: &CMatrix) -> Result<f64> {
    Ok(super::decomp::singular_values(m)?.iter().sum())
}

/// Schatten p-norm.
pub fn schatten_norm(m: &CMatrix, p: f64) -> Result<f64> {
    let sv = super::decomp::singular_values(m)?;
    if p.is_infinite() {
        return Ok(sv.first().copied().unwrap_or(0.0));
    }
    Ok(sv.iter().map(|s| s.powf(p)).sum::<f64>().powf(1.0 / p))
}

/// Hermitian principal square root of a PSD matrix (eigenvalues clamped at 0).
pub fn sqrtm_psd(m: &CMatrix) -> Result<CMatrix> {
    let (evals, vecs) = clamped_spectrum(m, 1e-7)?;
    let mut d = CMatrix::square_zeros(m.rows_dims());
    for (i, &l) in evals.iter().enumerate() {
        d.set(i, i, cr(l.sqrt()));
    }
    Ok(vecs.mul(&d).mul(&vecs.dagger()))
}

/// Moore-Penrose style inverse square root of a PSD matrix; eigenvalues below
/// `cutoff * lambda_max` are dropped (pseudo-inverse fallback).
pub fn inv_sqrtm_psd(m: &CMatrix, cutoff: f64) -> Result<CMatrix> {
    let (evals, vecs) = clamped_spectrum(m, 1e-7)?;
    let lmax = evals.first().copied().unwrap_or(0.0).max(1e-300);
    let mut d = CMatrix::square_zeros(m.rows_dims());
    for (i, &l) in evals.iter().enumerate() {
        if l > cutoff * lmax {
            d.set(i, i, cr(1.0 / l.sqrt()));
        }
    }
    Ok(vecs.mul(&d).mul(&vecs.dagger()))
}
