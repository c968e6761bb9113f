//! POVMs, instruments, dual frames, and linear-inversion state and channel
//! tomography.

use crate::channels::{choi_from_kraus, Channel};
use crate::error::{Error, Result};
use crate::qla::{cr, herm_eig, inv_sqrtm_psd, lu_solve, CMatrix, TAU_PSD};
use crate::random::{rng_from_seed, Seed};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Condition-number guard for Gram systems.
const COND_GUARD: f64 = 1e12;

/// A positive operator valued measure: positive elements summing to the
/// identity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Povm {
    pub elements: Vec<CMatrix>,
}

impl Povm {
    pub fn new(elements: Vec<CMatrix>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::BadInstrument("empty POVM".into()));
        }
        let d = elements[0].nrows();
        let mut sum = CMatrix::square_zeros(elements[0].rows_dims());
        for e in &elements {
            if e.nrows() != d || !e.is_square() {
                return Err(Error::DimMismatch("POVM element shapes differ".into()));
            }
            let (evals, _) = herm_eig(&e.herm_part())?;
            let lmax = evals.first().copied().unwrap_or(0.0).max(1.0);
            if let Some(&lmin) = evals.last() {
                if lmin < -TAU_PSD * lmax {
                    return Err(Error::NotPsd(lmin));
                }
            }
            sum = sum.add(e);
        }
        let resid = sum.max_abs_diff(&CMatrix::identity(elements[0].rows_dims()));
        if resid > 1e-9 {
            return Err(Error::BadInstrument(format!(
                "POVM elements sum to identity only within {resid:.3e}"
            )));
        }
        Ok(Povm { elements })
    }

    pub fn dim(&self) -> usize {
        self.elements[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Informationally complete iff the elements span the full matrix space.
    pub fn is_informationally_complete(&self) -> bool {
        let d = self.dim();
        if self.len() < d * d {
            return false;
        }
        matrix_span_rank(&self.elements) == d * d
    }

    /// Born-rule probabilities for a state.
    pub fn probabilities(&self, rho: &CMatrix) -> Result<Vec<f64>> {
        self.elements.iter().map(|e| born_prob(rho, e)).collect()
    }
}

/// An instrument: CP trace non-increasing maps adding up to a CPTP map.
#[derive(Debug, Clone)]
pub struct Instrument {
    pub elements: Vec<Channel>,
}

impl Instrument {
    pub fn new(elements: Vec<Channel>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::BadInstrument("empty instrument".into()));
        }
        let (d_in, d_out) = (elements[0].d_in, elements[0].d_out);
        let mut total = CMatrix::square_zeros(&[d_out, d_in]);
        for ch in &elements {
            if ch.d_in != d_in || ch.d_out != d_out {
                return Err(Error::DimMismatch("instrument element dims differ".into()));
            }
            let (cp, witness) = ch.is_cp()?;
            if !cp {
                return Err(Error::NotCp(witness));
            }
            total = total.add(&ch.choi());
        }
        let summed = Channel::from_choi(total, d_in, d_out)?;
        let (tp, resid) = summed.is_tp()?;
        if !tp {
            return Err(Error::BadInstrument(format!(
                "instrument elements sum to a non-CPTP map (residual {resid:.3e})"
            )));
        }
        Ok(Instrument { elements })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Outcome probabilities tr(A_x[rho]).
    pub fn probabilities(&self, rho: &CMatrix) -> Result<Vec<f64>> {
        self.elements
            .iter()
            .map(|ch| Ok(ch.apply(rho)?.trace().re))
            .collect()
    }

    /// Projective measure-and-feed-forward instrument in the computational
    /// basis.
    pub fn projective_z(d: usize) -> Self {
        let elements = (0..d)
            .map(|k| {
                let p = CMatrix::projector(&CMatrix::basis_ket(d, k));
                Channel::from_kraus(vec![p]).unwrap()
            })
            .collect();
        Instrument { elements }
    }

    /// Measures in the computational basis but always emits the maximally
    /// mixed state.
    pub fn measure_z_output_mixed(d: usize) -> Self {
        let elements = (0..d)
            .map(|k| {
                let ks = (0..d)
                    .map(|j| {
                        // K_{kj} = |j><k| / sqrt(d)
                        let mut m = CMatrix::square_zeros(&[d]);
                        m.set(j, k, cr(1.0 / (d as f64).sqrt()));
                        m
                    })
                    .collect();
                Channel::from_kraus(ks).unwrap()
            })
            .collect();
        Instrument { elements }
    }
}

/// Dual frame of a matrix basis: tr(D_j^dag B_k) = delta_jk.
#[derive(Debug, Clone)]
pub struct DualSet {
    pub duals: Vec<CMatrix>,
}

/// Solves the Gram system for the dual frame of a linearly independent basis.
pub fn dual_set(basis: &[CMatrix]) -> Result<DualSet> {
    if basis.is_empty() {
        return Err(Error::BadParam("empty basis".into()));
    }
    let n = basis.len();
    let mut gram = CMatrix::square_zeros(&[n]);
    for j in 0..n {
        for k in 0..n {
            gram.set(j, k, basis[j].dagger().mul(&basis[k]).trace());
        }
    }
    let (evals, _) = herm_eig(&gram.herm_part())?;
    let lmax = evals.first().copied().unwrap_or(0.0);
    let lmin = evals.last().copied().unwrap_or(0.0);
    if lmin <= 0.0 || lmax / lmin > COND_GUARD {
        return Err(Error::IllConditioned(if lmin > 0.0 {
            lmax / lmin
        } else {
            f64::INFINITY
        }));
    }
    // D_j = sum_m (G^{-1})_{mj}^* B_m
    let ginv = lu_solve(&gram, &CMatrix::identity(&[n]))?;
    let mut duals = Vec::with_capacity(n);
    for j in 0..n {
        let mut d = CMatrix::zeros(basis[0].rows_dims(), basis[0].cols_dims());
        for m in 0..n {
            d = d.add(&basis[m].scale(ginv.get(m, j).conj()));
        }
        duals.push(d);
    }
    Ok(DualSet { duals })
}

/// Numerical rank of the span of a list of equally-shaped matrices.
pub fn matrix_span_rank(mats: &[CMatrix]) -> usize {
    let n = mats.len();
    let len = mats[0].nrows() * mats[0].ncols();
    let mut stacked = CMatrix::zeros(&[n], &[len]);
    for (i, m) in mats.iter().enumerate() {
        for (j, v) in m.data().iter().enumerate() {
            stacked.set(i, j, *v);
        }
    }
    let sv = crate::qla::singular_values(&stacked).unwrap_or_default();
    let smax = sv.first().copied().unwrap_or(0.0);
    sv.iter().filter(|&&s| s > 1e-9 * smax.max(1e-300)).count()
}

/// Born rule p = tr(rho E).
pub fn born_prob(rho: &CMatrix, effect: &CMatrix) -> Result<f64> {
    if rho.nrows() != effect.nrows() {
        return Err(Error::DimMismatch(format!(
            "born_prob: state dim {} vs effect dim {}",
            rho.nrows(),
            effect.nrows()
        )));
    }
    Ok(rho.mul(effect).trace().re)
}

/// Symmetric informationally complete POVM on a qubit.
pub fn sic_povm_qubit() -> Povm {
    let kets: Vec<CMatrix> = (0..4)
        .map(|k| {
            let mut v = CMatrix::zeros(&[2], &[1]);
            if k == 0 {
                v.set(0, 0, cr(1.0));
            } else {
                let phase = 2.0 * std::f64::consts::PI * (k as f64 - 1.0) / 3.0;
                v.set(0, 0, cr((1.0f64 / 3.0).sqrt()));
                v.set(
                    1,
                    0,
                    crate::qla::c(phase.cos(), phase.sin()) * cr((2.0f64 / 3.0).sqrt()),
                );
            }
            v
        })
        .collect();
    let elements = kets
        .iter()
        .map(|v| CMatrix::projector(v).scale(cr(0.5)))
        .collect();
    Povm { elements }
}

/// Builds an informationally complete POVM from a positive, linearly
/// independent basis via E_k = F^{-1/2} F_k F^{-1/2} with F = sum F_k.
/// A singular F falls back to the pseudo-inverse.
pub fn ic_povm_from_positive_basis(f_basis: &[CMatrix]) -> Result<Povm> {
    if f_basis.is_empty() {
        return Err(Error::BadParam("empty positive basis".into()));
    }
    let mut f = CMatrix::square_zeros(f_basis[0].rows_dims());
    for fk in f_basis {
        f = f.add(fk);
    }
    let finv_sqrt = inv_sqrtm_psd(&f, 1e-12)?;
    let elements: Vec<CMatrix> = f_basis
        .iter()
        .map(|fk| finv_sqrt.mul(fk).mul(&finv_sqrt))
        .collect();
    Povm::new(elements)
}

/// Samples d^2 - 1 positive matrices, scales them by the largest alpha that
/// keeps the completing element positive (backed off slightly to stay inside
/// the cone), and returns the resulting IC POVM.
pub fn random_ic_povm(seed: Seed, d: usize) -> Result<Povm> {
    let mut rng = rng_from_seed(seed);
    loop {
        let mut elements: Vec<CMatrix> = (0..d * d - 1)
            .map(|_| {
                let g = crate::random::random_square(&mut rng, d);
                let w = g.mul(&g.dagger());
                w.scale(cr(1.0 / w.trace().re))
            })
            .collect();
        let mut sum = CMatrix::square_zeros(&[d]);
        for e in &elements {
            sum = sum.add(e);
        }
        let (evals, _) = herm_eig(&sum.herm_part())?;
        let lmax = evals.first().copied().unwrap_or(1.0);
        let alpha = 0.95 / lmax;
        for e in elements.iter_mut() {
            *e = e.scale(cr(alpha));
        }
        let mut last = CMatrix::identity(&[d]);
        for e in &elements {
            last = last.sub(e);
        }
        elements.push(last);
        let povm = Povm::new(elements)?;
        if povm.is_informationally_complete() {
            return Ok(povm);
        }
    }
}

/// Linear-inversion state tomography: rho = sum_k p_k Delta_k^dag with the
/// duals of an informationally complete POVM. Probabilities are consumed as
/// given; clamping is left to the reporting layer.
pub fn state_tomography(probs: &[f64], povm: &Povm) -> Result<CMatrix> {
    if probs.len() != povm.len() {
        return Err(Error::DimMismatch(format!(
            "{} probabilities for {} POVM elements",
            probs.len(),
            povm.len()
        )));
    }
    if !povm.is_informationally_complete() {
        return Err(Error::NotInformationallyComplete(
            "POVM does not span the matrix space".into(),
        ));
    }
    let psum: f64 = probs.iter().sum();
    if probs.iter().any(|&p| p < -1e-9) || (psum - 1.0).abs() > 1e-6 {
        return Err(Error::BadDistribution(format!(
            "POVM probabilities sum to {psum}"
        )));
    }
    let duals = dual_set(&povm.elements)?;
    let mut rho = CMatrix::square_zeros(povm.elements[0].rows_dims());
    for (p, d) in probs.iter().zip(&duals.duals) {
        rho = rho.add(&d.dagger().scale(cr(*p)));
    }
    Ok(rho)
}

/// Linear-inversion channel tomography from an informationally complete input
/// basis and the measured output states: Choi = sum_j rho'_j (x) D_j^*.
pub fn channel_tomography(input_basis: &[CMatrix], outputs: &[CMatrix]) -> Result<Channel> {
    if input_basis.len() != outputs.len() {
        return Err(Error::DimMismatch(
            "input basis and outputs differ in length".into(),
        ));
    }
    let d_in = input_basis[0].nrows();
    let d_out = outputs[0].nrows();
    if input_basis.len() != d_in * d_in {
        return Err(Error::NotInformationallyComplete(format!(
            "need {} input states, got {}",
            d_in * d_in,
            input_basis.len()
        )));
    }
    if matrix_span_rank(input_basis) != d_in * d_in {
        return Err(Error::NotInformationallyComplete(
            "input states are linearly dependent".into(),
        ));
    }
    let duals = dual_set(input_basis)?;
    let mut choi = CMatrix::square_zeros(&[d_out, d_in]);
    for (out, dual) in outputs.iter().zip(&duals.duals) {
        choi = choi.add(&out.kron(&dual.conj()));
    }
    Channel::from_choi(choi, d_in, d_out)
}

/// Discards the output of every instrument element, leaving the POVM with
/// E_j = tr_out(Choi_j)^T.
pub fn instrument_to_povm(instr: &Instrument) -> Result<Povm> {
    let elements = instr
        .elements
        .iter()
        .map(|ch| Ok(ch.choi().partial_trace(&[1])?.transpose()))
        .collect::<Result<Vec<_>>>()?;
    Povm::new(elements)
}

/// The four pure states |x+>, |y+>, |z+>, |x-> used as a qubit state basis.
pub fn qubit_state_basis() -> Vec<CMatrix> {
    ["x+", "y+", "z+", "x-"]
        .iter()
        .map(|l| CMatrix::projector(&crate::qla::qubit_ket(l)))
        .collect()
}

/// Prepare-and-measure CP maps A_(i,j)[rho] = <pi_j|rho|pi_j> |pi_i><pi_i|
/// over the qubit state basis: a 16-element linear basis of qubit operations.
pub fn qubit_op_basis() -> Vec<Channel> {
    let kets: Vec<CMatrix> = ["x+", "y+", "z+", "x-"]
        .iter()
        .map(|l| crate::qla::qubit_ket(l))
        .collect();
    let mut ops = Vec::with_capacity(16);
    for prep in &kets {
        for meas in &kets {
            // single Kraus |pi_i><pi_j|
            let mut k = CMatrix::square_zeros(&[2]);
            for r in 0..2 {
                for s in 0..2 {
                    k.set(r, s, prep.get(r, 0) * meas.get(s, 0).conj());
                }
            }
            ops.push(Channel::from_kraus(vec![k]).unwrap());
        }
    }
    ops
}

/// Choi matrices of [`qubit_op_basis`] on (out, in) factors.
pub fn qubit_op_basis_chois() -> Vec<CMatrix> {
    qubit_op_basis()
        .iter()
        .map(|ch| choi_from_kraus(&ch.kraus().unwrap()))
        .collect()
}

/// Random linearly independent state basis (d^2 density matrices).
pub fn random_state_basis(rng: &mut impl Rng, d: usize) -> Vec<CMatrix> {
    loop {
        let basis: Vec<CMatrix> = (0..d * d)
            .map(|_| crate::random::random_density(rng, d))
            .collect();
        if matrix_span_rank(&basis) == d * d {
            return basis;
        }
    }
}
