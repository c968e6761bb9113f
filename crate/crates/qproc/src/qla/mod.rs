//! Dense complex linear algebra with tensor-factor bookkeeping.
//!
//! [`CMatrix`] is the carrier for everything in this crate: states, Choi
//! matrices, superoperators, process tensors. It stores a dense complex
//! matrix in row-major order together with an ordered list of tensor-factor
//! dimensions for rows and columns. Factor index 0 is the leftmost (slowest)
//! tensor slot.

mod decomp;
mod funcs;

pub use decomp::{eigvals, herm_eig, inv, lu_solve, schur, singular_values};
pub use funcs::{
    expm, inv_sqrtm_psd, logm, purity, q_mutual_info, q_rel_entropy, schatten_norm, sqrtm_psd,
    trace_distance, trace_norm, vn_entropy, vn_entropy_mat,
};

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Default relative tolerance for positivity checks.
pub const TAU_PSD: f64 = 1e-9;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn cr(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Dense complex matrix over a product of tensor factors.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows_dims: Vec<usize>,
    cols_dims: Vec<usize>,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows_dims: &[usize], cols_dims: &[usize]) -> Self {
        let nr: usize = rows_dims.iter().product();
        let nc: usize = cols_dims.iter().product();
        CMatrix {
            rows_dims: rows_dims.to_vec(),
            cols_dims: cols_dims.to_vec(),
            data: vec![ZERO; nr * nc],
        }
    }

    /// Square zero matrix over the given factor dimensions.
    pub fn square_zeros(dims: &[usize]) -> Self {
        Self::zeros(dims, dims)
    }

    pub fn identity(dims: &[usize]) -> Self {
        let mut m = Self::square_zeros(dims);
        let n = m.nrows();
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    /// Builds from a row-major slice; `dims` are the square factor dimensions.
    pub fn from_slice(dims: &[usize], entries: &[Complex64]) -> Result<Self> {
        let n: usize = dims.iter().product();
        if entries.len() != n * n {
            return Err(Error::DimMismatch(format!(
                "expected {} entries, got {}",
                n * n,
                entries.len()
            )));
        }
        Ok(CMatrix {
            rows_dims: dims.to_vec(),
            cols_dims: dims.to_vec(),
            data: entries.to_vec(),
        })
    }

    /// Builds from real row-major entries; `dims` are square factor dimensions.
    pub fn from_real(dims: &[usize], entries: &[f64]) -> Result<Self> {
        let entries: Vec<Complex64> = entries.iter().map(|&x| cr(x)).collect();
        Self::from_slice(dims, &entries)
    }

    pub fn from_fn(
        rows_dims: &[usize],
        cols_dims: &[usize],
        mut f: impl FnMut(usize, usize) -> Complex64,
    ) -> Self {
        let mut m = Self::zeros(rows_dims, cols_dims);
        let (nr, nc) = (m.nrows(), m.ncols());
        for i in 0..nr {
            for j in 0..nc {
                m.data[i * nc + j] = f(i, j);
            }
        }
        m
    }

    /// Column vector |k> of dimension d (single factor).
    pub fn basis_ket(d: usize, k: usize) -> Self {
        let mut m = Self::zeros(&[d], &[1]);
        m.data[k] = ONE;
        m
    }

    /// Outer product |v><v| of a column vector.
    pub fn projector(v: &CMatrix) -> Self {
        let d = v.nrows();
        let mut m = CMatrix {
            rows_dims: v.rows_dims.clone(),
            cols_dims: v.rows_dims.clone(),
            data: vec![ZERO; d * d],
        };
        for i in 0..d {
            for j in 0..d {
                m.data[i * d + j] = v.data[i] * v.data[j].conj();
            }
        }
        m
    }

    /// Unnormalized maximally entangled state |Phi+><Phi+|, Phi+ = sum_k |kk>.
    pub fn max_entangled(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::BadParam(format!(
                "maximally entangled state needs d >= 2, got {d}"
            )));
        }
        let mut m = Self::square_zeros(&[d, d]);
        let n = d * d;
        for k in 0..d {
            for l in 0..d {
                m.data[(k * d + k) * n + (l * d + l)] = ONE;
            }
        }
        Ok(m)
    }

    pub fn nrows(&self) -> usize {
        self.rows_dims.iter().product()
    }

    pub fn ncols(&self) -> usize {
        self.cols_dims.iter().product()
    }

    pub fn rows_dims(&self) -> &[usize] {
        &self.rows_dims
    }

    pub fn cols_dims(&self) -> &[usize] {
        &self.cols_dims
    }

    /// Factor dimensions of a square matrix.
    pub fn dims(&self) -> &[usize] {
        debug_assert_eq!(self.rows_dims, self.cols_dims);
        &self.rows_dims
    }

    pub fn is_square(&self) -> bool {
        self.rows_dims == self.cols_dims
    }

    pub fn num_factors(&self) -> usize {
        self.rows_dims.len()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.ncols() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        let nc = self.ncols();
        self.data[i * nc + j] = v;
    }

    /// Reinterprets the factor structure without touching entries.
    pub fn with_dims(mut self, rows_dims: &[usize], cols_dims: &[usize]) -> Result<Self> {
        let nr: usize = rows_dims.iter().product();
        let nc: usize = cols_dims.iter().product();
        if nr != self.nrows() || nc != self.ncols() {
            return Err(Error::DimMismatch(format!(
                "cannot relabel {}x{} as {}x{}",
                self.nrows(),
                self.ncols(),
                nr,
                nc
            )));
        }
        self.rows_dims = rows_dims.to_vec();
        self.cols_dims = cols_dims.to_vec();
        Ok(self)
    }

    pub fn trace(&self) -> Complex64 {
        let n = self.nrows().min(self.ncols());
        let nc = self.ncols();
        (0..n).map(|i| self.data[i * nc + i]).sum()
    }

    pub fn conj(&self) -> Self {
        CMatrix {
            rows_dims: self.rows_dims.clone(),
            cols_dims: self.cols_dims.clone(),
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        let (nr, nc) = (self.nrows(), self.ncols());
        let mut out = CMatrix {
            rows_dims: self.cols_dims.clone(),
            cols_dims: self.rows_dims.clone(),
            data: vec![ZERO; nr * nc],
        };
        for i in 0..nr {
            for j in 0..nc {
                out.data[j * nr + i] = self.data[i * nc + j];
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        let (nr, nc) = (self.nrows(), self.ncols());
        let mut out = CMatrix {
            rows_dims: self.cols_dims.clone(),
            cols_dims: self.rows_dims.clone(),
            data: vec![ZERO; nr * nc],
        };
        for i in 0..nr {
            for j in 0..nc {
                out.data[j * nr + i] = self.data[i * nc + j].conj();
            }
        }
        out
    }

    pub fn scale(&self, z: Complex64) -> Self {
        CMatrix {
            rows_dims: self.rows_dims.clone(),
            cols_dims: self.cols_dims.clone(),
            data: self.data.iter().map(|x| x * z).collect(),
        }
    }

    pub fn add(&self, other: &CMatrix) -> Self {
        assert_eq!(self.nrows(), other.nrows());
        assert_eq!(self.ncols(), other.ncols());
        CMatrix {
            rows_dims: self.rows_dims.clone(),
            cols_dims: self.cols_dims.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &CMatrix) -> Self {
        assert_eq!(self.nrows(), other.nrows());
        assert_eq!(self.ncols(), other.ncols());
        CMatrix {
            rows_dims: self.rows_dims.clone(),
            cols_dims: self.cols_dims.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn mul(&self, other: &CMatrix) -> Self {
        assert_eq!(
            self.ncols(),
            other.nrows(),
            "matmul shape mismatch: {}x{} * {}x{}",
            self.nrows(),
            self.ncols(),
            other.nrows(),
            other.ncols()
        );
        let (nr, nk, nc) = (self.nrows(), self.ncols(), other.ncols());
        let mut out = CMatrix {
            rows_dims: self.rows_dims.clone(),
            cols_dims: other.cols_dims.clone(),
            data: vec![ZERO; nr * nc],
        };
        for i in 0..nr {
            for k in 0..nk {
                let a = self.data[i * nk + k];
                if a == ZERO {
                    continue;
                }
                let row = &other.data[k * nc..(k + 1) * nc];
                let dst = &mut out.data[i * nc..(i + 1) * nc];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// Kronecker product; factor lists concatenate.
    pub fn kron(&self, other: &CMatrix) -> Self {
        let (ar, ac) = (self.nrows(), self.ncols());
        let (br, bc) = (other.nrows(), other.ncols());
        let mut rows_dims = self.rows_dims.clone();
        rows_dims.extend_from_slice(&other.rows_dims);
        let mut cols_dims = self.cols_dims.clone();
        cols_dims.extend_from_slice(&other.cols_dims);
        let (nr, nc) = (ar * br, ac * bc);
        let mut data = vec![ZERO; nr * nc];
        for i in 0..ar {
            for j in 0..ac {
                let a = self.data[i * ac + j];
                if a == ZERO {
                    continue;
                }
                for k in 0..br {
                    for l in 0..bc {
                        data[(i * br + k) * nc + (j * bc + l)] = a * other.data[k * bc + l];
                    }
                }
            }
        }
        CMatrix {
            rows_dims,
            cols_dims,
            data,
        }
    }

    fn check_factors(&self, factors: &[usize]) -> Result<()> {
        for &f in factors {
            if f >= self.rows_dims.len() {
                return Err(Error::FactorOutOfRange(f, self.rows_dims.len()));
            }
        }
        Ok(())
    }

    /// Partial trace keeping the listed factors (square matrices only).
    /// The kept factors stay in their original relative order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<CMatrix> {
        if !self.is_square() {
            return Err(Error::NotSquare(self.nrows(), self.ncols()));
        }
        self.check_factors(keep)?;
        let dims = &self.rows_dims;
        let nf = dims.len();
        let mut kept: Vec<usize> = keep.to_vec();
        kept.sort_unstable();
        kept.dedup();
        let traced: Vec<usize> = (0..nf).filter(|f| !kept.contains(f)).collect();
        let kdims: Vec<usize> = kept.iter().map(|&f| dims[f]).collect();
        let tdims: Vec<usize> = traced.iter().map(|&f| dims[f]).collect();
        let kn: usize = kdims.iter().product();
        let tn: usize = tdims.iter().product();
        let strides = row_strides(dims);
        let kstr: Vec<usize> = kept.iter().map(|&f| strides[f]).collect();
        let tstr: Vec<usize> = traced.iter().map(|&f| strides[f]).collect();
        let n = self.nrows();
        let mut out = CMatrix {
            rows_dims: kdims.clone(),
            cols_dims: kdims,
            data: vec![ZERO; kn * kn],
        };
        let mut kidx_i = vec![0usize; kept.len()];
        for oi in 0..kn {
            decompose(oi, &out.rows_dims, &mut kidx_i);
            let base_i: usize = kidx_i.iter().zip(&kstr).map(|(a, s)| a * s).sum();
            let mut kidx_j = vec![0usize; kept.len()];
            for oj in 0..kn {
                decompose(oj, &out.rows_dims, &mut kidx_j);
                let base_j: usize = kidx_j.iter().zip(&kstr).map(|(a, s)| a * s).sum();
                let mut acc = ZERO;
                let mut tidx = vec![0usize; traced.len()];
                for t in 0..tn {
                    decompose(t, &tdims, &mut tidx);
                    let off: usize = tidx.iter().zip(&tstr).map(|(a, s)| a * s).sum();
                    acc += self.data[(base_i + off) * n + (base_j + off)];
                }
                out.data[oi * kn + oj] = acc;
            }
        }
        Ok(out)
    }

    /// Partial transpose on the listed factors (square matrices only).
    pub fn partial_transpose(&self, factors: &[usize]) -> Result<CMatrix> {
        if !self.is_square() {
            return Err(Error::NotSquare(self.nrows(), self.ncols()));
        }
        self.check_factors(factors)?;
        let dims = &self.rows_dims;
        let n = self.nrows();
        let strides = row_strides(dims);
        let mut out = self.clone();
        let nf = dims.len();
        let mut ii = vec![0usize; nf];
        let mut jj = vec![0usize; nf];
        for i in 0..n {
            decompose(i, dims, &mut ii);
            for j in 0..n {
                decompose(j, dims, &mut jj);
                // source indices with transposed factors
                let mut si = 0usize;
                let mut sj = 0usize;
                for f in 0..nf {
                    if factors.contains(&f) {
                        si += jj[f] * strides[f];
                        sj += ii[f] * strides[f];
                    } else {
                        si += ii[f] * strides[f];
                        sj += jj[f] * strides[f];
                    }
                }
                out.data[i * n + j] = self.data[si * n + sj];
            }
        }
        Ok(out)
    }

    /// Permutes tensor factors: output factor `k` is input factor `perm[k]`
    /// (same permutation on rows and columns; square matrices only).
    pub fn reorder_factors(&self, perm: &[usize]) -> Result<CMatrix> {
        if !self.is_square() {
            return Err(Error::NotSquare(self.nrows(), self.ncols()));
        }
        let nf = self.rows_dims.len();
        if perm.len() != nf {
            return Err(Error::DimMismatch(format!(
                "permutation length {} != factor count {}",
                perm.len(),
                nf
            )));
        }
        self.check_factors(perm)?;
        let dims = &self.rows_dims;
        let new_dims: Vec<usize> = perm.iter().map(|&f| dims[f]).collect();
        let strides = row_strides(dims);
        let n = self.nrows();
        let mut out = CMatrix {
            rows_dims: new_dims.clone(),
            cols_dims: new_dims.clone(),
            data: vec![ZERO; n * n],
        };
        let mut ii = vec![0usize; nf];
        let mut jj = vec![0usize; nf];
        for i in 0..n {
            decompose(i, &new_dims, &mut ii);
            let si: usize = (0..nf).map(|k| ii[k] * strides[perm[k]]).sum();
            for j in 0..n {
                decompose(j, &new_dims, &mut jj);
                let sj: usize = (0..nf).map(|k| jj[k] * strides[perm[k]]).sum();
                out.data[i * n + j] = self.data[si * n + sj];
            }
        }
        Ok(out)
    }

    /// Embeds an operator acting on a subset of factors into the full space:
    /// the result acts as `op` on `targets` (in the listed order) and as the
    /// identity elsewhere.
    pub fn embed_op(op: &CMatrix, targets: &[usize], dims: &[usize]) -> Result<CMatrix> {
        let nf = dims.len();
        for &t in targets {
            if t >= nf {
                return Err(Error::FactorOutOfRange(t, nf));
            }
        }
        let tdims: Vec<usize> = targets.iter().map(|&t| dims[t]).collect();
        if op.rows_dims().iter().product::<usize>() != tdims.iter().product::<usize>() {
            return Err(Error::DimMismatch(
                "operator does not match target factors".into(),
            ));
        }
        let others: Vec<usize> = (0..nf).filter(|f| !targets.contains(f)).collect();
        let odims: Vec<usize> = others.iter().map(|&f| dims[f]).collect();
        let on: usize = odims.iter().product();
        let tn: usize = tdims.iter().product();
        let strides = row_strides(dims);
        let tstr: Vec<usize> = targets.iter().map(|&f| strides[f]).collect();
        let ostr: Vec<usize> = others.iter().map(|&f| strides[f]).collect();
        let n: usize = dims.iter().product();
        let mut out = CMatrix::square_zeros(dims);
        let mut ti = vec![0usize; targets.len()];
        let mut tj = vec![0usize; targets.len()];
        let mut oo = vec![0usize; others.len()];
        for a in 0..tn {
            decompose(a, &tdims, &mut ti);
            let base_i: usize = ti.iter().zip(&tstr).map(|(x, s)| x * s).sum();
            for b in 0..tn {
                let v = op.data[a * tn + b];
                if v == ZERO {
                    continue;
                }
                decompose(b, &tdims, &mut tj);
                let base_j: usize = tj.iter().zip(&tstr).map(|(x, s)| x * s).sum();
                for o in 0..on {
                    decompose(o, &odims, &mut oo);
                    let off: usize = oo.iter().zip(&ostr).map(|(x, s)| x * s).sum();
                    out.data[(base_i + off) * n + (base_j + off)] = v;
                }
            }
        }
        Ok(out)
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest deviation from Hermiticity.
    pub fn herm_residual(&self) -> f64 {
        let n = self.nrows();
        let mut r: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                r = r.max((self.data[i * n + j] - self.data[j * n + i].conj()).norm());
            }
        }
        r
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.herm_residual() <= tol
    }

    /// (A + A^dag)/2.
    pub fn herm_part(&self) -> CMatrix {
        self.add(&self.dagger()).scale(cr(0.5))
    }

    /// Row-major flattening as a column vector (single factor).
    pub fn vec_row_major(&self) -> CMatrix {
        CMatrix {
            rows_dims: vec![self.nrows() * self.ncols()],
            cols_dims: vec![1],
            data: self.data.clone(),
        }
    }

    /// Inverse of [`CMatrix::vec_row_major`] for square targets.
    pub fn unvec_row_major(v: &[Complex64], d: usize) -> Result<CMatrix> {
        if v.len() != d * d {
            return Err(Error::DimMismatch(format!(
                "cannot reshape {} entries into {d}x{d}",
                v.len()
            )));
        }
        CMatrix::from_slice(&[d], v)
    }
}

/// Row-major strides for the given factor dimensions.
pub(crate) fn row_strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; dims.len()];
    for f in (0..dims.len().saturating_sub(1)).rev() {
        s[f] = s[f + 1] * dims[f + 1];
    }
    s
}

/// Decomposes a flat row-major index into per-factor indices.
pub(crate) fn decompose(mut idx: usize, dims: &[usize], out: &mut [usize]) {
    for f in (0..dims.len()).rev() {
        out[f] = idx % dims[f];
        idx /= dims[f];
    }
}

/// Pauli matrices sigma_0..sigma_3 as 2x2 `CMatrix` values.
pub fn pauli(k: usize) -> CMatrix {
    let d = [2usize];
    match k {
        0 => CMatrix::identity(&d),
        1 => CMatrix::from_slice(&d, &[ZERO, ONE, ONE, ZERO]).unwrap(),
        2 => CMatrix::from_slice(&d, &[ZERO, -I, I, ZERO]).unwrap(),
        3 => CMatrix::from_slice(&d, &[ONE, ZERO, ZERO, -ONE]).unwrap(),
        _ => panic!("pauli index must be 0..=3"),
    }
}

/// Ket |0>, |1>, |x+>, |x->, |y+>, |y-> etc. for qubit demos.
pub fn qubit_ket(label: &str) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let amps: [Complex64; 2] = match label {
        "0" | "z+" => [ONE, ZERO],
        "1" | "z-" => [ZERO, ONE],
        "x+" => [cr(s), cr(s)],
        "x-" => [cr(s), cr(-s)],
        "y+" => [cr(s), c(0.0, s)],
        "y-" => [cr(s), c(0.0, -s)],
        _ => panic!("unknown qubit label {label}"),
    };
    let mut v = CMatrix::zeros(&[2], &[1]);
    v.data[0] = amps[0];
    v.data[1] = amps[1];
    v
}

/// Density matrix: Hermitian, positive semidefinite, unit trace within
/// tolerance (or trace in [0, 1] when flagged subnormalized).
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    mat: CMatrix,
    subnormalized: bool,
}

impl DensityMatrix {
    pub fn new(mat: CMatrix) -> Result<Self> {
        Self::with_tol(mat, TAU_PSD)
    }

    pub fn with_tol(mat: CMatrix, tau: f64) -> Result<Self> {
        Self::check(&mat, tau, false)?;
        Ok(DensityMatrix {
            mat,
            subnormalized: false,
        })
    }

    pub fn new_subnormalized(mat: CMatrix, tau: f64) -> Result<Self> {
        Self::check(&mat, tau, true)?;
        Ok(DensityMatrix {
            mat,
            subnormalized: true,
        })
    }

    fn check(mat: &CMatrix, tau: f64, subnormalized: bool) -> Result<()> {
        if !mat.is_square() {
            return Err(Error::NotSquare(mat.nrows(), mat.ncols()));
        }
        let scale = mat.max_abs().max(1.0);
        if mat.herm_residual() > tau * scale {
            return Err(Error::NotHermitian(mat.herm_residual()));
        }
        let (evals, _) = herm_eig(&mat.herm_part())?;
        let lmax = evals.first().copied().unwrap_or(0.0).max(1.0);
        if let Some(&lmin) = evals.last() {
            if lmin < -tau * lmax {
                return Err(Error::NotPsd(lmin));
            }
        }
        let tr = mat.trace();
        if tr.im.abs() > tau * scale {
            return Err(Error::InvalidDensity(format!(
                "trace has imaginary part {:.3e}",
                tr.im
            )));
        }
        if subnormalized {
            if tr.re < -tau || tr.re > 1.0 + tau {
                return Err(Error::InvalidDensity(format!(
                    "subnormalized trace {} outside [0, 1]",
                    tr.re
                )));
            }
        } else if (tr.re - 1.0).abs() > tau.max(1e-9) {
            return Err(Error::InvalidDensity(format!("trace {} != 1", tr.re)));
        }
        Ok(())
    }

    pub fn mat(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_mat(self) -> CMatrix {
        self.mat
    }

    pub fn is_subnormalized(&self) -> bool {
        self.subnormalized
    }

    /// Pure state |psi><psi| from a ket.
    pub fn pure(ket: &CMatrix) -> Self {
        let norm: f64 = ket.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let normalized = ket.scale(cr(1.0 / norm));
        DensityMatrix {
            mat: CMatrix::projector(&normalized),
            subnormalized: false,
        }
    }

    /// Maximally mixed state on the given factor dimensions.
    pub fn maximally_mixed(dims: &[usize]) -> Self {
        let n: usize = dims.iter().product();
        DensityMatrix {
            mat: CMatrix::identity(dims).scale(cr(1.0 / n as f64)),
            subnormalized: false,
        }
    }
}

// Serde forms. The writer emits fields in exactly this order:
// rows_dims, cols_dims, re, im.
#[derive(Serialize, Deserialize)]
struct CMatrixDe {
    rows_dims: Vec<usize>,
    cols_dims: Vec<usize>,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Serialize for CMatrix {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let de = CMatrixDe {
            rows_dims: self.rows_dims.clone(),
            cols_dims: self.cols_dims.clone(),
            re: self.data.iter().map(|z| z.re).collect(),
            im: self.data.iter().map(|z| z.im).collect(),
        };
        de.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for CMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let raw = CMatrixDe::deserialize(de)?;
        let nr: usize = raw.rows_dims.iter().product();
        let nc: usize = raw.cols_dims.iter().product();
        if raw.re.len() != nr * nc || raw.im.len() != nr * nc {
            return Err(serde::de::Error::custom("entry count does not match dims"));
        }
        let data = raw
            .re
            .iter()
            .zip(&raw.im)
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect();
        Ok(CMatrix {
            rows_dims: raw.rows_dims,
            cols_dims: raw.cols_dims,
            data,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_density, random_square};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kron_identities() {
        let i2 = CMatrix::identity(&[2]);
        let i4 = i2.kron(&i2);
        assert_eq!(i4.dims(), &[2, 2]);
        assert!(i4.max_abs_diff(&CMatrix::identity(&[2, 2])) < 1e-15);

        let zz = pauli(3).kron(&pauli(3));
        let expect = CMatrix::from_real(&[2, 2], &{
            let mut e = [0.0; 16];
            e[0] = 1.0;
            e[5] = -1.0;
            e[10] = -1.0;
            e[15] = 1.0;
            e
        })
        .unwrap();
        assert!(zz.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn kron_projectors_direct_index_oracle() {
        // |0><0| (x) |1><1| compared against direct index expansion.
        let p0 = CMatrix::projector(&CMatrix::basis_ket(2, 0));
        let p1 = CMatrix::projector(&CMatrix::basis_ket(2, 1));
        let k = p0.kron(&p1);
        for i in 0..4 {
            for j in 0..4 {
                let (i0, i1) = (i / 2, i % 2);
                let (j0, j1) = (j / 2, j % 2);
                let expect = p0.get(i0, j0) * p1.get(i1, j1);
                assert_eq!(k.get(i, j), expect);
            }
        }
        // diag(0,1,0,0)
        assert!((k.get(1, 1) - ONE).norm() < 1e-15);
        assert!((k.trace() - ONE).norm() < 1e-15);
    }

    #[test]
    fn kron_associativity_and_trace_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a = random_square(&mut rng, 2);
            let b = random_square(&mut rng, 3);
            let cm = random_square(&mut rng, 2);
            let left = a.kron(&b).kron(&cm);
            let right = a.kron(&b.kron(&cm));
            assert!(left.max_abs_diff(&right) < 1e-12);
            let tp = a.kron(&b).trace();
            assert!((tp - a.trace() * b.trace()).norm() < 1e-12);
        }
    }

    #[test]
    fn partial_trace_product_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let a = random_square(&mut rng, 2);
            let b = random_square(&mut rng, 3);
            let ab = a.kron(&b);
            let ta = ab.partial_trace(&[0]).unwrap();
            assert!(ta.max_abs_diff(&a.scale(b.trace())) < 1e-12);
            let tb = ab.partial_trace(&[1]).unwrap();
            assert!(tb.max_abs_diff(&b.scale(a.trace())) < 1e-12);
        }
    }

    #[test]
    fn partial_trace_maximally_entangled() {
        let phi = CMatrix::max_entangled(2).unwrap().scale(cr(0.5));
        let red = phi.partial_trace(&[0]).unwrap();
        assert!(red.max_abs_diff(&CMatrix::identity(&[2]).scale(cr(0.5))) < 1e-14);
    }

    #[test]
    fn partial_trace_all_factors_is_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_square(&mut rng, 2).kron(&random_square(&mut rng, 2));
        let s = m.partial_trace(&[]).unwrap();
        assert_eq!(s.nrows(), 1);
        assert!((s.get(0, 0) - m.trace()).norm() < 1e-13);
    }

    #[test]
    fn partial_trace_bad_factor_errors() {
        let m = CMatrix::identity(&[2, 2]);
        assert!(m.partial_trace(&[5]).is_err());
    }

    #[test]
    fn partial_transpose_involution_and_swap() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_square(&mut rng, 2).kron(&random_square(&mut rng, 2));
        assert!(m.partial_transpose(&[]).unwrap().max_abs_diff(&m) < 1e-15);
        let twice = m
            .partial_transpose(&[1])
            .unwrap()
            .partial_transpose(&[1])
            .unwrap();
        assert!(twice.max_abs_diff(&m) < 1e-15);
        // full-set case equals ordinary transpose
        let full = m.partial_transpose(&[0, 1]).unwrap();
        assert!(full.max_abs_diff(&m.transpose()) < 1e-15);

        // PT of |Phi+><Phi+| on one qubit equals SWAP, checked elementwise.
        let phi = CMatrix::max_entangled(2).unwrap();
        let pt = phi.partial_transpose(&[1]).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let (a, b) = (i / 2, i % 2);
                let (p, q) = (j / 2, j % 2);
                let swap = if a == q && b == p { ONE } else { ZERO };
                assert!((pt.get(i, j) - swap).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn reorder_factors_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_square(&mut rng, 2);
        let b = random_square(&mut rng, 3);
        let ab = a.kron(&b);
        let ba = ab.reorder_factors(&[1, 0]).unwrap();
        assert!(ba.max_abs_diff(&b.kron(&a)) < 1e-13);
        let back = ba.reorder_factors(&[1, 0]).unwrap();
        assert!(back.max_abs_diff(&ab) < 1e-13);
    }

    #[test]
    fn embed_op_matches_kron() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let u = random_square(&mut rng, 2);
        let full = CMatrix::embed_op(&u, &[1], &[3, 2]).unwrap();
        let expect = CMatrix::identity(&[3]).kron(&u);
        assert!(full.max_abs_diff(&expect) < 1e-14);
        // two-factor target with reversed order equals swapped kron
        let v = random_square(&mut rng, 2);
        let uv = u.kron(&v);
        let emb = CMatrix::embed_op(&uv, &[2, 0], &[2, 3, 2]).unwrap();
        let direct = v
            .kron(&CMatrix::identity(&[3]))
            .kron(&u)
            .reorder_factors(&[0, 1, 2])
            .unwrap();
        assert!(emb.max_abs_diff(&direct) < 1e-13);
    }

    #[test]
    fn max_entangled_properties() {
        let phi = CMatrix::max_entangled(3).unwrap();
        assert!((phi.trace() - cr(3.0)).norm() < 1e-15);
        let red = phi.partial_trace(&[0]).unwrap().scale(cr(1.0 / 3.0));
        assert!(red.max_abs_diff(&CMatrix::identity(&[3]).scale(cr(1.0 / 3.0))) < 1e-14);
        assert!(CMatrix::max_entangled(1).is_err());
    }

    #[test]
    fn density_validation() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rho = random_density(&mut rng, 4);
        assert!(DensityMatrix::new(rho.clone()).is_ok());
        let bad = rho.scale(cr(1.5));
        assert!(DensityMatrix::new(bad).is_err());
        let nonherm = random_square(&mut rng, 3);
        assert!(DensityMatrix::new(nonherm).is_err());
    }

    #[test]
    fn json_roundtrip_field_order() {
        let m = pauli(2);
        let s = serde_json::to_string(&m).unwrap();
        let ri = s.find("\"rows_dims\"").unwrap();
        let ci = s.find("\"cols_dims\"").unwrap();
        let re = s.find("\"re\"").unwrap();
        let im = s.find("\"im\"").unwrap();
        assert!(ri < ci && ci < re && re < im);
        let back: CMatrix = serde_json::from_str(&s).unwrap();
        assert!(back.max_abs_diff(&m) < 1e-15);
    }
}
