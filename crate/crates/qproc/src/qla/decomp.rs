//! Decompositions: Hermitian eigensolver (cyclic Jacobi), singular values via
//! the Hermitian dilation, LU solve/inverse, and a complex Schur form used by
//! the matrix logarithm.

use super::{cr, CMatrix, ONE, ZERO};
use crate::error::{Error, Result};
use num_complex::Complex64;

/// Eigendecomposition of a Hermitian matrix. Returns eigenvalues in
/// descending order and the matching eigenvectors as columns, so that
/// `M = V diag(w) V^dag`.
pub fn herm_eig(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    if !m.is_square() {
        return Err(Error::NotSquare(m.nrows(), m.ncols()));
    }
    let scale = m.max_abs().max(1e-300);
    if m.herm_residual() > 1e-8 * scale.max(1.0) {
        return Err(Error::NotHermitian(m.herm_residual()));
    }
    let n = m.nrows();
    let mut a: Vec<Complex64> = m.data().to_vec();
    // enforce exact Hermiticity to keep the iteration clean
    for i in 0..n {
        a[i * n + i] = cr(a[i * n + i].re);
        for j in (i + 1)..n {
            let avg = (a[i * n + j] + a[j * n + i].conj()) * cr(0.5);
            a[i * n + j] = avg;
            a[j * n + i] = avg.conj();
        }
    }
    let mut v: Vec<Complex64> = vec![ZERO; n * n];
    for i in 0..n {
        v[i * n + i] = ONE;
    }
    let fro: f64 = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let stop = (1e-15 * fro).max(1e-300);
    for _sweep in 0..60 {
        let mut off: f64 = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q].norm_sqr();
            }
        }
        if (2.0 * off).sqrt() <= stop {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                let r = apq.norm();
                if r <= stop / (n as f64) {
                    continue;
                }
                let phase = apq / cr(r);
                let app = a[p * n + p].re;
                let aqq = a[q * n + q].re;
                let tau = (aqq - app) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let cth = 1.0 / (1.0 + t * t).sqrt();
                let sth = t * cth;
                // J[p][p] = c, J[p][q] = s, J[q][p] = -s*conj(phase),
                // J[q][q] = c*conj(phase); apply M <- J^dag M J, V <- V J.
                let jpp = cr(cth);
                let jpq = cr(sth);
                let jqp = -cr(sth) * phase.conj();
                let jqq = cr(cth) * phase.conj();
                for k in 0..n {
                    let mkp = a[k * n + p];
                    let mkq = a[k * n + q];
                    a[k * n + p] = mkp * jpp + mkq * jqp;
                    a[k * n + q] = mkp * jpq + mkq * jqq;
                }
                for k in 0..n {
                    let mpk = a[p * n + k];
                    let mqk = a[q * n + k];
                    a[p * n + k] = jpp.conj() * mpk + jqp.conj() * mqk;
                    a[q * n + k] = jpq.conj() * mpk + jqq.conj() * mqk;
                }
                a[p * n + q] = ZERO;
                a[q * n + p] = ZERO;
                a[p * n + p] = cr(a[p * n + p].re);
                a[q * n + q] = cr(a[q * n + q].re);
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = vkp * jpp + vkq * jqp;
                    v[k * n + q] = vkp * jpq + vkq * jqq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let evals: Vec<f64> = (0..n).map(|i| a[i * n + i].re).collect();
    order.sort_by(|&i, &j| evals[j].partial_cmp(&evals[i]).unwrap());
    let sorted: Vec<f64> = order.iter().map(|&i| evals[i]).collect();
    let mut vecs = CMatrix::zeros(m.rows_dims(), m.cols_dims());
    for (newcol, &oldcol) in order.iter().enumerate() {
        for k in 0..n {
            vecs.set(k, newcol, v[k * n + oldcol]);
        }
    }
    Ok((sorted, vecs))
}

/// Singular values in descending order, computed from the Hermitian dilation
/// [[0, M], [M^dag, 0]] so that small values keep absolute accuracy.
pub fn singular_values(m: &CMatrix) -> Result<Vec<f64>> {
    let (nr, nc) = (m.nrows(), m.ncols());
    let n = nr + nc;
    let mut h = CMatrix::square_zeros(&[n]);
    for i in 0..nr {
        for j in 0..nc {
            h.set(i, nr + j, m.get(i, j));
            h.set(nr + j, i, m.get(i, j).conj());
        }
    }
    let (evals, _) = herm_eig(&h)?;
    let k = nr.min(nc);
    Ok(evals.into_iter().take(k).map(|x| x.max(0.0)).collect())
}

/// Solves A X = B by Gaussian elimination with partial pivoting.
pub fn lu_solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if !a.is_square() {
        return Err(Error::NotSquare(a.nrows(), a.ncols()));
    }
    let n = a.nrows();
    if b.nrows() != n {
        return Err(Error::DimMismatch(format!(
            "solve: A is {n}x{n} but B has {} rows",
            b.nrows()
        )));
    }
    let nc = b.ncols();
    let mut m: Vec<Complex64> = a.data().to_vec();
    let mut x: Vec<Complex64> = b.data().to_vec();
    let scale = a.max_abs().max(1e-300);
    for col in 0..n {
        let mut piv = col;
        let mut best = m[col * n + col].norm();
        for r in (col + 1)..n {
            let v = m[r * n + col].norm();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best <= 1e-14 * scale {
            return Err(Error::Singular(best));
        }
        if piv != col {
            for k in 0..n {
                m.swap(col * n + k, piv * n + k);
            }
            for k in 0..nc {
                x.swap(col * nc + k, piv * nc + k);
            }
        }
        let d = m[col * n + col];
        for r in (col + 1)..n {
            let f = m[r * n + col] / d;
            if f == ZERO {
                continue;
            }
            for k in col..n {
                let sub = f * m[col * n + k];
                m[r * n + k] -= sub;
            }
            for k in 0..nc {
                let sub = f * x[col * nc + k];
                x[r * nc + k] -= sub;
            }
        }
    }
    for col in (0..n).rev() {
        let d = m[col * n + col];
        for k in 0..nc {
            let mut acc = x[col * nc + k];
            for j in (col + 1)..n {
                acc -= m[col * n + j] * x[j * nc + k];
            }
            x[col * nc + k] = acc / d;
        }
    }
    let mut out = CMatrix::zeros(a.rows_dims(), b.cols_dims());
    for i in 0..n {
        for j in 0..nc {
            out.set(i, j, x[i * nc + j]);
        }
    }
    Ok(out)
}

pub fn inv(a: &CMatrix) -> Result<CMatrix> {
    let id = CMatrix::identity(a.rows_dims());
    lu_solve(a, &id)
}

/// Complex Schur decomposition M = Q T Q^dag with T upper triangular.
pub fn schur(m: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    if !m.is_square() {
        return Err(Error::NotSquare(m.nrows(), m.ncols()));
    }
    let n = m.nrows();
    let mut t: Vec<Complex64> = m.data().to_vec();
    let mut q: Vec<Complex64> = vec![ZERO; n * n];
    for i in 0..n {
        q[i * n + i] = ONE;
    }
    hessenberg(&mut t, &mut q, n);
    qr_iterate(&mut t, Some(&mut q), n)?;
    let qm = CMatrix::from_fn(m.rows_dims(), m.cols_dims(), |i, j| q[i * n + j]);
    let tm = CMatrix::from_fn(m.rows_dims(), m.cols_dims(), |i, j| {
        if i > j {
            ZERO
        } else {
            t[i * n + j]
        }
    });
    Ok((qm, tm))
}

/// Eigenvalues of a general complex matrix (unordered).
pub fn eigvals(m: &CMatrix) -> Result<Vec<Complex64>> {
    if !m.is_square() {
        return Err(Error::NotSquare(m.nrows(), m.ncols()));
    }
    let n = m.nrows();
    let mut t: Vec<Complex64> = m.data().to_vec();
    let mut qdummy: Vec<Complex64> = Vec::new();
    hessenberg(&mut t, &mut qdummy, n);
    qr_iterate(&mut t, None, n)?;
    Ok((0..n).map(|i| t[i * n + i]).collect())
}

/// Householder reduction to upper Hessenberg form; accumulates the
/// transformation into `q` when it is non-empty.
fn hessenberg(a: &mut [Complex64], q: &mut [Complex64], n: usize) {
    if n < 3 {
        return;
    }
    for k in 0..(n - 2) {
        // build reflector for column k, rows k+1..n
        let mut norm2 = 0.0;
        for i in (k + 1)..n {
            norm2 += a[i * n + k].norm_sqr();
        }
        let norm = norm2.sqrt();
        if norm < 1e-300 {
            continue;
        }
        let x0 = a[(k + 1) * n + k];
        let phase = if x0.norm() > 0.0 { x0 / cr(x0.norm()) } else { ONE };
        let alpha = -phase * cr(norm);
        // v = x - alpha e1
        let mut v: Vec<Complex64> = vec![ZERO; n];
        for i in (k + 1)..n {
            v[i] = a[i * n + k];
        }
        v[k + 1] -= alpha;
        let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if vnorm2 < 1e-300 {
            continue;
        }
        let beta = 2.0 / vnorm2;
        // A <- H A, H = I - beta v v^dag
        for col in 0..n {
            let mut dot = ZERO;
            for i in (k + 1)..n {
                dot += v[i].conj() * a[i * n + col];
            }
            dot *= cr(beta);
            for i in (k + 1)..n {
                let sub = v[i] * dot;
                a[i * n + col] -= sub;
            }
        }
        // A <- A H
        for row in 0..n {
            let mut dot = ZERO;
            for i in (k + 1)..n {
                dot += a[row * n + i] * v[i];
            }
            dot *= cr(beta);
            for i in (k + 1)..n {
                let sub = dot * v[i].conj();
                a[row * n + i] -= sub;
            }
        }
        if !q.is_empty() {
            // Q <- Q H
            for row in 0..n {
                let mut dot = ZERO;
                for i in (k + 1)..n {
                    dot += q[row * n + i] * v[i];
                }
                dot *= cr(beta);
                for i in (k + 1)..n {
                    let sub = dot * v[i].conj();
                    q[row * n + i] -= sub;
                }
            }
        }
    }
    for i in 2..n {
        for j in 0..(i - 1) {
            a[i * n + j] = ZERO;
        }
    }
}

/// Shifted QR iteration on an upper Hessenberg matrix, reducing it to upper
/// triangular form. `q` accumulates the unitary similarity when present.
fn qr_iterate(a: &mut [Complex64], mut q: Option<&mut Vec<Complex64>>, n: usize) -> Result<()> {
    if n < 2 {
        return Ok(());
    }
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    let eps = 1e-15;
    let mut hi = n - 1;
    let mut iters = 0usize;
    let max_iters = 60 * n;
    loop {
        // deflate converged subdiagonals
        while hi > 0 {
            let sub = a[hi * n + (hi - 1)].norm();
            let local = a[(hi - 1) * n + (hi - 1)].norm() + a[hi * n + hi].norm();
            if sub <= eps * local.max(scale * 1e-30) {
                a[hi * n + (hi - 1)] = ZERO;
                hi -= 1;
            } else {
                break;
            }
        }
        if hi == 0 {
            return Ok(());
        }
        // active block [lo..=hi]
        let mut lo = hi;
        while lo > 0 {
            let sub = a[lo * n + (lo - 1)].norm();
            let local = a[(lo - 1) * n + (lo - 1)].norm() + a[lo * n + lo].norm();
            if sub <= eps * local.max(scale * 1e-30) {
                a[lo * n + (lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        iters += 1;
        if iters > max_iters {
            return Err(Error::NoConvergence(format!(
                "QR iteration stalled on block {lo}..{hi}"
            )));
        }
        // Wilkinson shift from trailing 2x2
        let h11 = a[(hi - 1) * n + (hi - 1)];
        let h12 = a[(hi - 1) * n + hi];
        let h21 = a[hi * n + (hi - 1)];
        let h22 = a[hi * n + hi];
        let tr = h11 + h22;
        let det = h11 * h22 - h12 * h21;
        let disc = (tr * tr - cr(4.0) * det).sqrt();
        let r1 = (tr + disc) * cr(0.5);
        let r2 = (tr - disc) * cr(0.5);
        let mut mu = if (r1 - h22).norm() <= (r2 - h22).norm() {
            r1
        } else {
            r2
        };
        // occasional exceptional shift to break symmetry stalls
        if iters % 29 == 0 {
            mu += cr(0.5) * h21;
        }
        // explicit shifted QR step on the active block: factor A - mu I via
        // Givens row rotations, then form R Q + mu I by the matching column
        // rotations
        for i in lo..=hi {
            a[i * n + i] -= mu;
        }
        let mut rots: Vec<(usize, Complex64, Complex64)> = Vec::with_capacity(hi - lo);
        for i in lo..hi {
            let x = a[i * n + i];
            let y = a[(i + 1) * n + i];
            let r = (x.norm_sqr() + y.norm_sqr()).sqrt();
            let (cg, sg) = if r < 1e-300 {
                (ONE, ZERO)
            } else {
                (x.conj() / cr(r), y.conj() / cr(r))
            };
            for col in 0..n {
                let u = a[i * n + col];
                let w = a[(i + 1) * n + col];
                a[i * n + col] = cg * u + sg * w;
                a[(i + 1) * n + col] = -sg.conj() * u + cg.conj() * w;
            }
            rots.push((i, cg, sg));
        }
        for &(i, cg, sg) in &rots {
            // apply G^dag on columns i, i+1
            for row in 0..n {
                let u = a[row * n + i];
                let w = a[row * n + (i + 1)];
                a[row * n + i] = u * cg.conj() + w * sg.conj();
                a[row * n + (i + 1)] = -u * sg + w * cg;
            }
            if let Some(qm) = q.as_deref_mut() {
                for row in 0..n {
                    let u = qm[row * n + i];
                    let w = qm[row * n + (i + 1)];
                    qm[row * n + i] = u * cg.conj() + w * sg.conj();
                    qm[row * n + (i + 1)] = -u * sg + w * cg;
                }
            }
        }
        for i in lo..=hi {
            a[i * n + i] += mu;
        }
    }
}
