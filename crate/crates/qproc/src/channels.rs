//! Quantum channels in Kraus, Choi, and superoperator representations.
//!
//! Conventions: the Choi matrix lives on (output x input) factor order,
//! `Choi = sum_j vec(K_j) vec(K_j)^dag` with row-major vectorization, which
//! realizes `(E (x) I)[|Phi+><Phi+|]`. The superoperator acts on row-major
//! vectorized density matrices, `vec(E[rho]) = S vec(rho)`.

use crate::error::{Error, Result};
use crate::qla::{cr, herm_eig, CMatrix, ONE, TAU_PSD, ZERO};
use crate::random::{random_kraus_set, rng_from_seed, Seed};
use serde::{Deserialize, Serialize};

/// Representation of a channel payload.
#[derive(Debug, Clone)]
pub enum Rep {
    Kraus(Vec<CMatrix>),
    Choi(CMatrix),
    SuperOp(CMatrix),
}

impl Rep {
    pub fn kind(&self) -> RepKind {
        match self {
            Rep::Kraus(_) => RepKind::Kraus,
            Rep::Choi(_) => RepKind::Choi,
            Rep::SuperOp(_) => RepKind::SuperOp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RepKind {
    Kraus,
    Choi,
    SuperOp,
}

/// A quantum map between d_in- and d_out-dimensional systems, held in one of
/// three interconvertible representations.
#[derive(Debug, Clone)]
pub struct Channel {
    pub d_in: usize,
    pub d_out: usize,
    rep: Rep,
}

impl Channel {
    pub fn from_kraus(kraus: Vec<CMatrix>) -> Result<Self> {
        let k0 = kraus
            .first()
            .ok_or_else(|| Error::BadParam("empty Kraus list".into()))?;
        let (d_out, d_in) = (k0.nrows(), k0.ncols());
        for k in &kraus {
            if k.nrows() != d_out || k.ncols() != d_in {
                return Err(Error::DimMismatch("inconsistent Kraus shapes".into()));
            }
        }
        Ok(Channel {
            d_in,
            d_out,
            rep: Rep::Kraus(kraus),
        })
    }

    pub fn from_choi(choi: CMatrix, d_in: usize, d_out: usize) -> Result<Self> {
        if choi.nrows() != d_in * d_out || !choi.is_square() {
            return Err(Error::DimMismatch(format!(
                "Choi side {} does not match d_out*d_in = {}",
                choi.nrows(),
                d_in * d_out
            )));
        }
        let choi = choi.with_dims(&[d_out, d_in], &[d_out, d_in])?;
        Ok(Channel {
            d_in,
            d_out,
            rep: Rep::Choi(choi),
        })
    }

    pub fn from_superop(s: CMatrix, d_in: usize, d_out: usize) -> Result<Self> {
        if s.nrows() != d_out * d_out || s.ncols() != d_in * d_in {
            return Err(Error::DimMismatch(format!(
                "superoperator shape {}x{} does not match d_out^2 x d_in^2",
                s.nrows(),
                s.ncols()
            )));
        }
        Ok(Channel {
            d_in,
            d_out,
            rep: Rep::SuperOp(s),
        })
    }

    pub fn rep(&self) -> &Rep {
        &self.rep
    }

    pub fn rep_kind(&self) -> RepKind {
        self.rep.kind()
    }

    /// The Choi matrix on (out, in) factors, computed on demand.
    pub fn choi(&self) -> CMatrix {
        match &self.rep {
            Rep::Choi(u) => u.clone(),
            Rep::Kraus(ks) => choi_from_kraus(ks),
            Rep::SuperOp(s) => reshuffle_superop_to_choi(s, self.d_in, self.d_out),
        }
    }

    /// The superoperator acting on row-major vectorized matrices.
    pub fn superop(&self) -> CMatrix {
        match &self.rep {
            Rep::SuperOp(s) => s.clone(),
            Rep::Kraus(ks) => superop_from_kraus(ks),
            Rep::Choi(u) => reshuffle_choi_to_superop(u, self.d_in, self.d_out),
        }
    }

    /// A Kraus decomposition; fails when the map is not completely positive.
    pub fn kraus(&self) -> Result<Vec<CMatrix>> {
        match &self.rep {
            Rep::Kraus(ks) => Ok(ks.clone()),
            _ => kraus_from_choi(&self.choi(), self.d_in, self.d_out),
        }
    }

    /// Re-expresses the channel in another representation.
    pub fn convert(&self, target: RepKind) -> Result<Channel> {
        let rep = match target {
            RepKind::Choi => Rep::Choi(self.choi()),
            RepKind::SuperOp => Rep::SuperOp(self.superop()),
            RepKind::Kraus => Rep::Kraus(self.kraus()?),
        };
        Ok(Channel {
            d_in: self.d_in,
            d_out: self.d_out,
            rep,
        })
    }

    /// Applies the channel to a matrix.
    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        if rho.nrows() != self.d_in || rho.ncols() != self.d_in {
            return Err(Error::DimMismatch(format!(
                "apply: state is {}x{}, channel expects {}",
                rho.nrows(),
                rho.ncols(),
                self.d_in
            )));
        }
        match &self.rep {
            Rep::Kraus(ks) => {
                let mut acc = CMatrix::square_zeros(&[self.d_out]);
                for k in ks {
                    acc = acc.add(&k.mul(rho).mul(&k.dagger()));
                }
                Ok(acc)
            }
            Rep::SuperOp(s) => {
                let v = s.mul(&rho.vec_row_major());
                CMatrix::unvec_row_major(v.data(), self.d_out)
            }
            Rep::Choi(u) => {
                // E[rho] = tr_in[(1_out (x) rho^T) Choi]
                let lift = CMatrix::identity(&[self.d_out]).kron(&rho.transpose());
                lift.mul(u).partial_trace(&[0])
            }
        }
    }

    /// Complete positivity check; the witness is the most negative Choi
    /// eigenvalue (0 when none).
    pub fn is_cp(&self) -> Result<(bool, f64)> {
        let u = self.choi().herm_part();
        let (evals, _) = herm_eig(&u)?;
        let lmax = evals.first().copied().unwrap_or(0.0).max(1.0);
        let lmin = evals.last().copied().unwrap_or(0.0);
        let witness = lmin.min(0.0);
        Ok((lmin >= -TAU_PSD * lmax, witness))
    }

    /// Trace preservation check; the residual is the largest deviation of
    /// tr_out(Choi) from the input identity.
    pub fn is_tp(&self) -> Result<(bool, f64)> {
        let u = self.choi();
        let red = u.partial_trace(&[1])?;
        let resid = red.max_abs_diff(&CMatrix::identity(&[self.d_in]));
        Ok((resid <= 1e-9, resid))
    }

    /// Sequential composition: (self . earlier), earlier runs first.
    pub fn compose(&self, earlier: &Channel) -> Result<Channel> {
        if earlier.d_out != self.d_in {
            return Err(Error::DimMismatch(format!(
                "compose: inner dims {} vs {}",
                earlier.d_out, self.d_in
            )));
        }
        let s = self.superop().mul(&earlier.superop());
        Channel::from_superop(s, earlier.d_in, self.d_out)
    }

    /// Stinespring dilation with environment prepared in |0>. Returns the
    /// unitary on system (x) environment and the environment dimension.
    pub fn dilate_to_unitary(&self) -> Result<(CMatrix, usize)> {
        let (tp, resid) = self.is_tp()?;
        if !tp {
            return Err(Error::NotTp(resid));
        }
        if self.d_in != self.d_out {
            return Err(Error::DimMismatch(
                "dilation implemented for equal input/output dims".into(),
            ));
        }
        let d = self.d_in;
        let ks = self.kraus()?;
        let de = ks.len();
        let n = d * de;
        // isometry V[(s, e), s'] = K_e[s, s'] occupies columns (s', 0)
        let mut u = CMatrix::square_zeros(&[d, de]);
        for sp in 0..d {
            let col = sp * de;
            for s in 0..d {
                for e in 0..de {
                    u.set(s * de + e, col, ks[e].get(s, sp));
                }
            }
        }
        // complete the remaining columns by Gram-Schmidt over the standard basis
        let mut have: Vec<usize> = (0..d).map(|sp| sp * de).collect();
        let mut free: Vec<usize> = (0..n).filter(|col| col % de != 0).collect();
        let mut cand = 0usize;
        while let Some(&col) = free.first() {
            if cand >= n {
                return Err(Error::NoConvergence(
                    "unitary completion ran out of candidates".into(),
                ));
            }
            let mut v = vec![ZERO; n];
            v[cand] = ONE;
            cand += 1;
            for &hcol in &have {
                let mut dot = ZERO;
                for r in 0..n {
                    dot += u.get(r, hcol).conj() * v[r];
                }
                for (r, x) in v.iter_mut().enumerate() {
                    *x -= dot * u.get(r, hcol);
                }
            }
            let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm <= 1e-10 {
                continue;
            }
            for r in 0..n {
                u.set(r, col, v[r] / cr(norm));
            }
            have.push(col);
            free.remove(0);
        }
        Ok((u, de))
    }
}

/// Row-major vectorization |rho>> of a matrix.
pub fn vectorize(rho: &CMatrix) -> CMatrix {
    rho.vec_row_major()
}

/// Inverse of [`vectorize`] for square matrices.
pub fn devectorize(v: &CMatrix) -> Result<CMatrix> {
    let len = v.nrows() * v.ncols();
    let d = (len as f64).sqrt().round() as usize;
    if d * d != len {
        return Err(Error::DimMismatch(format!(
            "cannot reshape a length-{len} vector into a square matrix"
        )));
    }
    CMatrix::unvec_row_major(v.data(), d)
}

/// Choi matrix from Kraus operators: sum_j vec(K_j) vec(K_j)^dag.
pub fn choi_from_kraus(kraus: &[CMatrix]) -> CMatrix {
    let (d_out, d_in) = (kraus[0].nrows(), kraus[0].ncols());
    let n = d_out * d_in;
    let mut u = CMatrix::square_zeros(&[d_out, d_in]);
    for k in kraus {
        let v = k.data();
        for i in 0..n {
            for j in 0..n {
                let add = v[i] * v[j].conj();
                u.set(i, j, u.get(i, j) + add);
            }
        }
    }
    u
}

/// Minimal Kraus decomposition from the eigendecomposition of the Choi
/// matrix. Eigenvalues below `1e-9 * lambda_max` are discarded; a negative
/// eigenvalue beyond tolerance reports the map as not completely positive.
pub fn kraus_from_choi(choi: &CMatrix, d_in: usize, d_out: usize) -> Result<Vec<CMatrix>> {
    let (evals, vecs) = herm_eig(&choi.herm_part())?;
    let lmax = evals.first().copied().unwrap_or(0.0).max(1e-300);
    let mut ks = Vec::new();
    for (i, &l) in evals.iter().enumerate() {
        if l < -TAU_PSD * lmax.max(1.0) {
            return Err(Error::NotCp(l));
        }
        if l <= 1e-9 * lmax {
            continue;
        }
        let mut k = CMatrix::zeros(&[d_out], &[d_in]);
        for r in 0..d_out {
            for s in 0..d_in {
                k.set(r, s, vecs.get(r * d_in + s, i) * cr(l.sqrt()));
            }
        }
        ks.push(k);
    }
    if ks.is_empty() {
        ks.push(CMatrix::zeros(&[d_out], &[d_in]));
    }
    Ok(ks)
}

/// Superoperator from Kraus operators: sum_j K_j (x) conj(K_j).
pub fn superop_from_kraus(kraus: &[CMatrix]) -> CMatrix {
    let (d_out, d_in) = (kraus[0].nrows(), kraus[0].ncols());
    let mut s = CMatrix::zeros(&[d_out, d_out], &[d_in, d_in]);
    for k in kraus {
        s = s.add(&k.kron(&k.conj()));
    }
    s
}

/// Choi[(a,r),(b,s)] = Superop[(a,b),(r,s)].
pub fn reshuffle_superop_to_choi(s: &CMatrix, d_in: usize, d_out: usize) -> CMatrix {
    let mut u = CMatrix::square_zeros(&[d_out, d_in]);
    for a in 0..d_out {
        for b in 0..d_out {
            for r in 0..d_in {
                for sx in 0..d_in {
                    u.set(a * d_in + r, b * d_in + sx, s.get(a * d_out + b, r * d_in + sx));
                }
            }
        }
    }
    u
}

pub fn reshuffle_choi_to_superop(u: &CMatrix, d_in: usize, d_out: usize) -> CMatrix {
    let mut s = CMatrix::zeros(&[d_out, d_out], &[d_in, d_in]);
    for a in 0..d_out {
        for b in 0..d_out {
            for r in 0..d_in {
                for sx in 0..d_in {
                    s.set(a * d_out + b, r * d_in + sx, u.get(a * d_in + r, b * d_in + sx));
                }
            }
        }
    }
    s
}

/// The channel zoo.
#[derive(Debug, Clone)]
pub enum ChannelKind {
    /// Relaxation toward |0> with survival probability p (p = 1: identity,
    /// p = 0: everything maps to the ground state).
    AmplitudeDamping { p: f64 },
    /// Random Pauli channel with weights p0..p3 summing to one.
    Depolarizing { p: [f64; 4] },
    /// Pure dephasing in the z basis; off-diagonals scale by exp(-gamma t).
    Dephasing { gamma_t: f64 },
    Unitary(CMatrix),
    /// Oscillatory qubit map with Bloch contraction cos^2(2 omega t); its
    /// one-parameter family is CP but not divisible.
    XzOscillatory { omega_t: f64 },
    RandomCptp { seed: Seed, d: usize, rank: usize },
}

/// Builds a channel from the zoo; every output passes is_cp and is_tp.
pub fn channel_factory(kind: ChannelKind) -> Result<Channel> {
    match kind {
        ChannelKind::AmplitudeDamping { p } => {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::BadParam(format!("amplitude damping p={p}")));
            }
            let k0 = CMatrix::from_slice(&[2], &[ONE, ZERO, ZERO, cr(p.sqrt())])?;
            let k1 = CMatrix::from_slice(&[2], &[ZERO, cr((1.0 - p).sqrt()), ZERO, ZERO])?;
            Channel::from_kraus(vec![k0, k1])
        }
        ChannelKind::Depolarizing { p } => {
            let sum: f64 = p.iter().sum();
            if p.iter().any(|&x| x < 0.0) || (sum - 1.0).abs() > 1e-12 {
                return Err(Error::BadParam(format!(
                    "depolarizing weights must be positive and sum to 1, got {p:?}"
                )));
            }
            let ks = (0..4)
                .filter(|&j| p[j] > 0.0)
                .map(|j| crate::qla::pauli(j).scale(cr(p[j].sqrt())))
                .collect();
            Channel::from_kraus(ks)
        }
        ChannelKind::Dephasing { gamma_t } => {
            if gamma_t < 0.0 {
                return Err(Error::BadParam(format!("dephasing gamma*t={gamma_t}")));
            }
            let e = (-gamma_t).exp();
            let k0 = CMatrix::identity(&[2]).scale(cr(((1.0 + e) / 2.0).sqrt()));
            let k1 = crate::qla::pauli(3).scale(cr(((1.0 - e) / 2.0).sqrt()));
            Channel::from_kraus(vec![k0, k1])
        }
        ChannelKind::Unitary(u) => {
            if !u.is_square() {
                return Err(Error::NotSquare(u.nrows(), u.ncols()));
            }
            let resid = u
                .dagger()
                .mul(&u)
                .max_abs_diff(&CMatrix::identity(u.rows_dims()));
            if resid > 1e-9 {
                return Err(Error::BadParam(format!("matrix is not unitary ({resid:.3e})")));
            }
            Channel::from_kraus(vec![u])
        }
        ChannelKind::XzOscillatory { omega_t } => {
            let c2 = (2.0 * omega_t).cos().powi(2);
            let h = 0.5;
            let choi = CMatrix::from_real(
                &[2, 2],
                &[
                    h * (1.0 + c2), 0.0, 0.0, -c2,
                    0.0, h * (1.0 - c2), 0.0, 0.0,
                    0.0, 0.0, h * (1.0 - c2), 0.0,
                    -c2, 0.0, 0.0, h * (1.0 + c2),
                ],
            )?;
            Channel::from_choi(choi, 2, 2)
        }
        ChannelKind::RandomCptp { seed, d, rank } => {
            if d == 0 || rank == 0 || rank > d * d {
                return Err(Error::BadParam(format!(
                    "random channel needs 1 <= rank <= d^2, got d={d}, rank={rank}"
                )));
            }
            let mut rng = rng_from_seed(seed);
            Channel::from_kraus(random_kraus_set(&mut rng, d, rank))
        }
    }
}

/// Choi matrix of the (generally non-CP) map inferred when a fixed
/// system-environment correlation term is carried along while the system
/// state is varied over a basis: the affine reduced dynamics
/// rho -> c^2 rho + (1-c^2) tr(rho) I/2 - g c s tr(rho) sigma_x / 2 with
/// c = cos(2 omega t), s = sin(2 omega t).
pub fn xz_example1_choi(omega_t: f64, g: f64) -> CMatrix {
    let cw = (2.0 * omega_t).cos();
    let sw = (2.0 * omega_t).sin();
    let c2 = cw * cw;
    let phi = CMatrix::max_entangled(2).unwrap();
    let id4 = CMatrix::identity(&[2, 2]);
    let sx1 = crate::qla::pauli(1).kron(&CMatrix::identity(&[2]));
    phi.scale(cr(c2))
        .add(&id4.scale(cr((1.0 - c2) / 2.0)))
        .add(&sx1.scale(cr(-g * cw * sw / 2.0)))
}

// JSON form: {"d_in":, "d_out":, "rep":, "payload":[CMatrix...]}.
#[derive(Serialize, Deserialize)]
struct ChannelJson {
    d_in: usize,
    d_out: usize,
    rep: RepKind,
    payload: Vec<CMatrix>,
}

impl Serialize for Channel {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let payload = match &self.rep {
            Rep::Kraus(ks) => ks.clone(),
            Rep::Choi(u) => vec![u.clone()],
            Rep::SuperOp(s) => vec![s.clone()],
        };
        ChannelJson {
            d_in: self.d_in,
            d_out: self.d_out,
            rep: self.rep.kind(),
            payload,
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Channel {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let raw = ChannelJson::deserialize(de)?;
        match raw.rep {
            RepKind::Kraus => Channel::from_kraus(raw.payload).map_err(D::Error::custom),
            RepKind::Choi => {
                let u = raw
                    .payload
                    .into_iter()
                    .next()
                    .ok_or_else(|| D::Error::custom("missing Choi payload"))?;
                Channel::from_choi(u, raw.d_in, raw.d_out).map_err(D::Error::custom)
            }
            RepKind::SuperOp => {
                let s = raw
                    .payload
                    .into_iter()
                    .next()
                    .ok_or_else(|| D::Error::custom("missing superoperator payload"))?;
                Channel::from_superop(s, raw.d_in, raw.d_out).map_err(D::Error::custom)
            }
        }
    }
}

/// Identity channel on dimension d.
pub fn identity_channel(d: usize) -> Channel {
    Channel::from_kraus(vec![CMatrix::identity(&[d])]).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qla::{c, pauli, q_mutual_info, q_rel_entropy, qubit_ket};
    use crate::random::{random_density, rng_from_seed};

    fn basis_agreement(a: &Channel, b: &Channel) -> f64 {
        // max deviation of apply() over the elementary-matrix basis
        let d = a.d_in;
        let mut worst: f64 = 0.0;
        for k in 0..d {
            for l in 0..d {
                let mut e = CMatrix::square_zeros(&[d]);
                e.set(k, l, ONE);
                let x = a.apply(&e).unwrap();
                let y = b.apply(&e).unwrap();
                worst = worst.max(x.max_abs_diff(&y));
            }
        }
        worst
    }

    #[test]
    fn identity_channel_applies() {
        let id = identity_channel(2);
        let mut rng = rng_from_seed(1);
        let rho = random_density(&mut rng, 2);
        assert!(id.apply(&rho).unwrap().max_abs_diff(&rho) < 1e-14);
    }

    #[test]
    fn amplitude_damping_full_decay() {
        let ch = channel_factory(ChannelKind::AmplitudeDamping { p: 0.0 }).unwrap();
        let ground = CMatrix::projector(&qubit_ket("0"));
        let mut rng = rng_from_seed(2);
        for _ in 0..20 {
            let rho = random_density(&mut rng, 2);
            assert!(ch.apply(&rho).unwrap().max_abs_diff(&ground) < 1e-10);
        }
    }

    #[test]
    fn amplitude_damping_superop_matches_printed_form() {
        let p: f64 = 0.37;
        let ch = channel_factory(ChannelKind::AmplitudeDamping { p }).unwrap();
        let s = ch.superop();
        let expect = CMatrix::from_real(
            &[2, 2],
            &[
                1.0, 0.0, 0.0, 1.0 - p,
                0.0, p.sqrt(), 0.0, 0.0,
                0.0, 0.0, p.sqrt(), 0.0,
                0.0, 0.0, 0.0, p,
            ],
        )
        .unwrap()
        .with_dims(&[2, 2], &[2, 2])
        .unwrap();
        assert!(s.max_abs_diff(&expect) < 1e-14);
        // action on a vectorized state: [r00 + (1-p) r11, sqrt(p) r01, ...]
        let mut rng = rng_from_seed(3);
        let rho = random_density(&mut rng, 2);
        let v = s.mul(&vectorize(&rho));
        assert!((v.get(0, 0) - (rho.get(0, 0) + cr(1.0 - p) * rho.get(1, 1))).norm() < 1e-13);
        assert!((v.get(1, 0) - cr(p.sqrt()) * rho.get(0, 1)).norm() < 1e-13);
        assert!((v.get(2, 0) - cr(p.sqrt()) * rho.get(1, 0)).norm() < 1e-13);
        assert!((v.get(3, 0) - cr(p) * rho.get(1, 1)).norm() < 1e-13);
    }

    #[test]
    fn dephasing_scales_offdiagonals() {
        let gt = 0.8;
        let ch = channel_factory(ChannelKind::Dephasing { gamma_t: gt }).unwrap();
        let mut rng = rng_from_seed(4);
        let rho = random_density(&mut rng, 2);
        let out = ch.apply(&rho).unwrap();
        assert!((out.get(0, 0) - rho.get(0, 0)).norm() < 1e-13);
        assert!((out.get(0, 1) - rho.get(0, 1) * cr((-gt).exp())).norm() < 1e-13);
    }

    #[test]
    fn vectorize_roundtrip() {
        assert_eq!(
            vectorize(&CMatrix::projector(&qubit_ket("0"))).data(),
            &[ONE, ZERO, ZERO, ZERO]
        );
        let mut rng = rng_from_seed(5);
        for _ in 0..50 {
            let m = crate::random::random_square(&mut rng, 3);
            let back = devectorize(&vectorize(&m)).unwrap();
            assert!(back.max_abs_diff(&m) < 1e-15);
        }
    }

    #[test]
    fn choi_of_identity_is_max_entangled() {
        let u = identity_channel(2).choi();
        assert!(u.max_abs_diff(&CMatrix::max_entangled(2).unwrap()) < 1e-14);
    }

    #[test]
    fn depolarizing_choi_matches_printed_form() {
        let p = [0.4, 0.3, 0.2, 0.1];
        let ch = channel_factory(ChannelKind::Depolarizing { p }).unwrap();
        let u = ch.choi();
        let expect = CMatrix::from_real(
            &[2, 2],
            &[
                p[0] + p[3], 0.0, 0.0, p[0] - p[3],
                0.0, p[1] + p[2], p[1] - p[2], 0.0,
                0.0, p[1] - p[2], p[1] + p[2], 0.0,
                p[0] - p[3], 0.0, 0.0, p[0] + p[3],
            ],
        )
        .unwrap()
        .with_dims(&[2, 2], &[2, 2])
        .unwrap();
        assert!(u.max_abs_diff(&expect) < 1e-14);
        // eigenvalues {2 p_j}
        let (mut evals, _) = herm_eig(&u).unwrap();
        evals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut want: Vec<f64> = p.iter().map(|x| 2.0 * x).collect();
        want.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (e, w) in evals.iter().zip(&want) {
            assert!((e - w).abs() < 1e-12);
        }
        // uniform weights give Choi = I/2
        let uni = channel_factory(ChannelKind::Depolarizing { p: [0.25; 4] })
            .unwrap()
            .choi();
        assert!(uni.max_abs_diff(&CMatrix::identity(&[2, 2]).scale(cr(0.5))) < 1e-14);
    }

    #[test]
    fn kraus_choi_roundtrip_on_random_channels() {
        for seed in 0..10u64 {
            let ch = channel_factory(ChannelKind::RandomCptp {
                seed,
                d: 3,
                rank: 1 + (seed as usize % 4),
            })
            .unwrap();
            let back = Channel::from_choi(ch.choi(), 3, 3).unwrap();
            let back = back.convert(RepKind::Kraus).unwrap();
            assert!(basis_agreement(&ch, &back) < 1e-10);
            // minimal Kraus count equals the Choi rank and stays below d_in*d_out
            let ks = back.kraus().unwrap();
            assert!(ks.len() <= 9);
        }
    }

    #[test]
    fn all_representations_agree() {
        for seed in 0..5u64 {
            let ch = channel_factory(ChannelKind::RandomCptp {
                seed: 100 + seed,
                d: 2,
                rank: 3,
            })
            .unwrap();
            for kind in [RepKind::Kraus, RepKind::Choi, RepKind::SuperOp] {
                let conv = ch.convert(kind).unwrap();
                assert!(basis_agreement(&ch, &conv) < 1e-10);
            }
        }
        // identity in all three reps
        let id = identity_channel(2);
        for kind in [RepKind::Kraus, RepKind::Choi, RepKind::SuperOp] {
            let conv = id.convert(kind).unwrap();
            assert!(basis_agreement(&id, &conv) < 1e-12);
        }
    }

    #[test]
    fn cp_and_tp_verdicts() {
        let dp = channel_factory(ChannelKind::Depolarizing {
            p: [0.7, 0.1, 0.1, 0.1],
        })
        .unwrap();
        assert!(dp.is_cp().unwrap().0);
        assert!(dp.is_tp().unwrap().0);

        // transposition map: Choi is the SWAP matrix, eigenvalue -1
        let swap = CMatrix::max_entangled(2)
            .unwrap()
            .partial_transpose(&[1])
            .unwrap();
        let t = Channel::from_choi(swap, 2, 2).unwrap();
        let (cp, witness) = t.is_cp().unwrap();
        assert!(!cp);
        assert!((witness + 1.0).abs() < 1e-12);
        assert!(t.is_tp().unwrap().0);
        assert!(matches!(t.kraus(), Err(Error::NotCp(_))));
    }

    #[test]
    fn example1_initial_correlation_witness() {
        // eigenvalues (1 - c^2 +/- g c s)/2 go negative for suitable g, wt
        let (wt, g): (f64, f64) = (0.5, 0.9);
        let cw = (2.0 * wt).cos();
        let sw = (2.0 * wt).sin();
        let u = xz_example1_choi(wt, g);
        let (evals, _) = herm_eig(&u).unwrap();
        let predicted = [
            0.5 * (1.0 - cw * cw + g * cw * sw),
            0.5 * (1.0 - cw * cw - g * cw * sw),
        ];
        for p in predicted {
            assert!(
                evals.iter().any(|e| (e - p).abs() < 1e-9),
                "missing eigenvalue {p}, got {evals:?}"
            );
        }
        // negativity witness on a grid
        let mut saw_negative = false;
        for gi in 1..=4 {
            for wi in 1..=8 {
                let g = gi as f64 / 4.0;
                let wt = wi as f64 * 0.35;
                let ch = Channel::from_choi(xz_example1_choi(wt, g), 2, 2).unwrap();
                if !ch.is_cp().unwrap().0 {
                    saw_negative = true;
                }
            }
        }
        assert!(saw_negative);
    }

    #[test]
    fn dilation_roundtrip() {
        // identity channel dilates with a one-dimensional environment
        let id = identity_channel(2);
        let (u, de) = id.dilate_to_unitary().unwrap();
        assert_eq!(de, 1);
        assert!(u.max_abs_diff(&CMatrix::identity(&[2, 1])) < 1e-12);

        let mut worst: f64 = 0.0;
        for seed in 0..50u64 {
            let d = 2 + (seed as usize % 2);
            let ch = channel_factory(ChannelKind::RandomCptp {
                seed: 200 + seed,
                d,
                rank: 1 + (seed as usize % 3),
            })
            .unwrap();
            let (u, de) = ch.dilate_to_unitary().unwrap();
            let n = d * de;
            assert!(
                u.dagger().mul(&u).max_abs_diff(&CMatrix::identity(&[n])) < 1e-9,
                "completion is not unitary"
            );
            // recover the channel: tr_E(U (rho (x) |0><0|) U^dag)
            let e0 = CMatrix::projector(&CMatrix::basis_ket(de, 0));
            let mut rng = rng_from_seed(300 + seed);
            let rho = random_density(&mut rng, d);
            let joint = u.mul(&rho.kron(&e0)).mul(&u.dagger());
            let red = joint.partial_trace(&[0]).unwrap();
            worst = worst.max(red.max_abs_diff(&ch.apply(&rho).unwrap()));
        }
        assert!(worst < 1e-9, "dilation roundtrip residual {worst:.3e}");
    }

    #[test]
    fn dilated_dephasing_reproduces_dynamics() {
        let gt = 0.6;
        let ch = channel_factory(ChannelKind::Dephasing { gamma_t: gt }).unwrap();
        let (u, de) = ch.dilate_to_unitary().unwrap();
        let e0 = CMatrix::projector(&CMatrix::basis_ket(de, 0));
        let plus = CMatrix::projector(&qubit_ket("x+"));
        let joint = u.mul(&plus.kron(&e0)).mul(&u.dagger());
        let red = joint.partial_trace(&[0]).unwrap();
        let expect = ch.apply(&plus).unwrap();
        assert!(red.max_abs_diff(&expect) < 1e-10);
        assert!((red.get(0, 1).re - 0.5 * (-gt).exp()).abs() < 1e-10);
    }

    #[test]
    fn composition_matches_sequential_application() {
        let id = identity_channel(2);
        let deph = channel_factory(ChannelKind::Dephasing { gamma_t: 0.3 }).unwrap();
        assert!(basis_agreement(&deph.compose(&id).unwrap(), &deph) < 1e-12);

        // dephasing semigroup: E(s) . E(t-s) = E(t)
        let (s, t) = (0.4, 1.1);
        let a = channel_factory(ChannelKind::Dephasing { gamma_t: s }).unwrap();
        let b = channel_factory(ChannelKind::Dephasing { gamma_t: t - s }).unwrap();
        let full = channel_factory(ChannelKind::Dephasing { gamma_t: t }).unwrap();
        assert!(basis_agreement(&a.compose(&b).unwrap(), &full) < 1e-12);

        let mut rng = rng_from_seed(6);
        for seed in 0..5u64 {
            let c1 = channel_factory(ChannelKind::RandomCptp {
                seed: 400 + seed,
                d: 2,
                rank: 2,
            })
            .unwrap();
            let c2 = channel_factory(ChannelKind::RandomCptp {
                seed: 500 + seed,
                d: 2,
                rank: 2,
            })
            .unwrap();
            let rho = random_density(&mut rng, 2);
            let seq = c2.apply(&c1.apply(&rho).unwrap()).unwrap();
            let comp = c2.compose(&c1).unwrap().apply(&rho).unwrap();
            assert!(seq.max_abs_diff(&comp) < 1e-12);
        }
    }

    #[test]
    fn apply_is_linear() {
        let ch = channel_factory(ChannelKind::RandomCptp {
            seed: 9,
            d: 2,
            rank: 2,
        })
        .unwrap();
        let mut rng = rng_from_seed(10);
        let a = crate::random::random_square(&mut rng, 2);
        let b = crate::random::random_square(&mut rng, 2);
        let (alpha, beta) = (c(0.3, -0.8), c(1.2, 0.4));
        let lhs = ch.apply(&a.scale(alpha).add(&b.scale(beta))).unwrap();
        let rhs = ch
            .apply(&a)
            .unwrap()
            .scale(alpha)
            .add(&ch.apply(&b).unwrap().scale(beta));
        assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn factory_outputs_pass_cp_tp_and_agree_across_reps() {
        let mut zoo = vec![
            channel_factory(ChannelKind::AmplitudeDamping { p: 0.5 }).unwrap(),
            channel_factory(ChannelKind::Depolarizing {
                p: [0.25, 0.25, 0.25, 0.25],
            })
            .unwrap(),
            channel_factory(ChannelKind::Dephasing { gamma_t: 0.0 }).unwrap(),
            channel_factory(ChannelKind::XzOscillatory { omega_t: 0.35 }).unwrap(),
            channel_factory(ChannelKind::Unitary(pauli(1))).unwrap(),
        ];
        for seed in 0..50u64 {
            zoo.push(
                channel_factory(ChannelKind::RandomCptp {
                    seed: 600 + seed,
                    d: 2,
                    rank: 1 + (seed as usize % 4),
                })
                .unwrap(),
            );
        }
        for ch in &zoo {
            assert!(ch.is_cp().unwrap().0);
            assert!(ch.is_tp().unwrap().0);
            for kind in [RepKind::Kraus, RepKind::Choi, RepKind::SuperOp] {
                assert!(basis_agreement(ch, &ch.convert(kind).unwrap()) < 1e-10);
            }
        }
        // dephasing at t=0 is the identity
        let d0 = channel_factory(ChannelKind::Dephasing { gamma_t: 0.0 }).unwrap();
        assert!(basis_agreement(&d0, &identity_channel(2)) < 1e-13);
        // xz_oscillatory Choi entries: (1 +/- c^2)/2 on the diagonal, -c^2 corners
        let wt = 0.35;
        let c2 = (2.0f64 * wt).cos().powi(2);
        let u = channel_factory(ChannelKind::XzOscillatory { omega_t: wt })
            .unwrap()
            .choi();
        assert!((u.get(0, 0).re - 0.5 * (1.0 + c2)).abs() < 1e-13);
        assert!((u.get(1, 1).re - 0.5 * (1.0 - c2)).abs() < 1e-13);
        assert!((u.get(0, 3).re + c2).abs() < 1e-13);
    }

    #[test]
    fn factory_rejects_bad_params() {
        assert!(channel_factory(ChannelKind::AmplitudeDamping { p: 1.5 }).is_err());
        assert!(channel_factory(ChannelKind::Depolarizing {
            p: [0.5, 0.5, 0.5, -0.5],
        })
        .is_err());
        assert!(channel_factory(ChannelKind::Dephasing { gamma_t: -0.1 }).is_err());
        assert!(channel_factory(ChannelKind::Unitary(pauli(1).scale(cr(2.0)))).is_err());
    }

    #[test]
    fn data_processing_inequalities_under_random_channels() {
        // relative entropy and mutual information never increase under CPTP
        // maps applied to both arguments / one marginal
        let mut rng = rng_from_seed(11);
        for seed in 0..50u64 {
            let ch = channel_factory(ChannelKind::RandomCptp {
                seed: 700 + seed,
                d: 2,
                rank: 1 + (seed as usize % 4),
            })
            .unwrap();
            let rho = random_density(&mut rng, 2);
            let sigma = random_density(&mut rng, 2);
            let before = q_rel_entropy(&rho, &sigma).unwrap();
            let after =
                q_rel_entropy(&ch.apply(&rho).unwrap(), &ch.apply(&sigma).unwrap()).unwrap();
            assert!(
                after <= before + 1e-9,
                "relative entropy grew: {before} -> {after}"
            );

            let joint = random_density(&mut rng, 4)
                .with_dims(&[2, 2], &[2, 2])
                .unwrap();
            let mi_before = q_mutual_info(&joint, &[0]).unwrap();
            // apply the channel to subsystem A via its Kraus operators
            let mut out = CMatrix::square_zeros(&[2, 2]);
            for k in ch.kraus().unwrap() {
                let lift = k.kron(&CMatrix::identity(&[2]));
                out = out.add(&lift.mul(&joint).mul(&lift.dagger()));
            }
            let mi_after = q_mutual_info(&out, &[0]).unwrap();
            assert!(
                mi_after <= mi_before + 1e-9,
                "mutual information grew: {mi_before} -> {mi_after}"
            );
        }
    }

    #[test]
    fn channel_json_roundtrip() {
        let ch = channel_factory(ChannelKind::AmplitudeDamping { p: 0.3 }).unwrap();
        let s = serde_json::to_string(&ch).unwrap();
        let back: Channel = serde_json::from_str(&s).unwrap();
        assert!(basis_agreement(&ch, &back) < 1e-13);
        let choi_form = ch.convert(RepKind::Choi).unwrap();
        let s2 = serde_json::to_string(&choi_form).unwrap();
        let back2: Channel = serde_json::from_str(&s2).unwrap();
        assert!(basis_agreement(&ch, &back2) < 1e-13);
    }
}
