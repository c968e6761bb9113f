//! Markovianity decisions, non-Markovianity quantification, quantum Markov
//! order, and the two-point witnesses (divisibility, snapshot, trace
//! distance).

use crate::channels::Channel;
use crate::error::{Error, Result};
use crate::proctensor::{
    contract_factors, op_element, ProcessTensor, Slot, SlotBasis,
    SlotDir, TimeOp,
};
use crate::qla::{
    cr, expm, inv, logm, q_rel_entropy, schatten_norm, singular_values, trace_distance,
    trace_norm, vn_entropy_mat, CMatrix,
};
use serde::Serialize;

/// Marginal of the Choi over the kept factors with the Born normalization:
/// the partial trace divided by the dimensions of the dropped output slots.
pub fn born_marginal(t: &ProcessTensor, keep_factors: &[usize]) -> Result<CMatrix> {
    let dropped_out: usize = t
        .slots
        .iter()
        .enumerate()
        .filter(|(i, s)| !keep_factors.contains(i) && s.dir == SlotDir::Out)
        .map(|(_, s)| s.d)
        .product();
    Ok(t.choi
        .partial_trace(keep_factors)?
        .scale(cr(1.0 / dropped_out as f64)))
}

/// Grouping of the slot list into per-step factors: an optional initial
/// state factor followed by one (o, i) pair per step.
fn step_factor_groups(t: &ProcessTensor) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut idx = 0usize;
    if t.slots[0].dir == SlotDir::In {
        groups.push(vec![0]);
        idx = 1;
    }
    while idx + 1 < t.slots.len() {
        groups.push(vec![idx, idx + 1]);
        idx += 2;
    }
    groups
}

/// The closest Markov process in relative entropy: the product of the
/// per-step marginals of the given process.
pub fn closest_markov(t: &ProcessTensor) -> Result<ProcessTensor> {
    let groups = step_factor_groups(t);
    let mut choi: Option<CMatrix> = None;
    for g in &groups {
        let m = born_marginal(t, g)?;
        choi = Some(match choi {
            None => m,
            Some(acc) => acc.kron(&m),
        });
    }
    ProcessTensor::new(t.slots.clone(), choi.unwrap())
}

/// Relative-entropy measure of non-Markovianity on trace-normalized Choi
/// states, together with the probability of confusing the process for a
/// Markovian one after n = 1, 10, 100 samples.
pub fn nonmarkov_rel_entropy(t: &ProcessTensor) -> Result<(f64, [f64; 3])> {
    let markov = closest_markov(t)?;
    let n_r = q_rel_entropy(&t.normalized_choi(), &markov.normalized_choi())?;
    let n_r = n_r.max(0.0);
    let confusion = [
        (-n_r).exp(),
        (-10.0 * n_r).exp(),
        (-100.0 * n_r).exp(),
    ];
    Ok((n_r, confusion))
}

#[derive(Debug, Clone, Serialize)]
pub struct MarkovVerdict {
    pub markov: bool,
    /// Trace-norm distance between the normalized process and the product of
    /// its marginals.
    pub distance: f64,
    /// Largest pairwise deviation between conditional future tensors over a
    /// causal-break basis.
    pub max_conditional_dev: f64,
}

/// Causal-break product basis of past elements for a break at step `k`.
fn causal_break_basis(t: &ProcessTensor, k: usize) -> Vec<CMatrix> {
    let preps = SlotBasis::qubit_preps().elements;
    let ops = SlotBasis::qubit_ops().elements;
    let effects = SlotBasis::qubit_effects().elements;
    let mut parts: Vec<Vec<CMatrix>> = Vec::new();
    for &time in t.times().iter().filter(|&&x| x <= k) {
        let fs = t.slots_of_time(time);
        if time == k {
            parts.push(effects.clone());
        } else if fs.len() == 2 {
            parts.push(ops.clone());
        } else {
            parts.push(preps.clone());
        }
    }
    let mut elements = vec![CMatrix::identity(&[] as &[usize])];
    for p in &parts {
        let mut next = Vec::with_capacity(elements.len() * p.len());
        for e in &elements {
            for x in p {
                next.push(e.kron(x));
            }
        }
        elements = next;
    }
    elements
}

/// Markovianity decision: product form of the Choi state cross-checked by
/// conditional independence over a causal-break basis.
pub fn is_markov(t: &ProcessTensor, tol: f64) -> Result<MarkovVerdict> {
    let markov = closest_markov(t)?;
    let diff = t.normalized_choi().sub(&markov.normalized_choi());
    let distance = trace_norm(&diff)?;
    let mut max_dev: f64 = 0.0;
    let times = t.times();
    for &k in &times[..times.len() - 1] {
        // a break at k needs an output slot at k
        if t.slots_of_time(k).len() < 2 && t.slots[0].t != k {
            continue;
        }
        if t.slots_of_time(k)
            .iter()
            .all(|&i| t.slots[i].dir == SlotDir::In)
            && t.slots_of_time(k).len() == 1
            && k != times[0]
        {
            continue;
        }
        let basis = causal_break_basis(t, k);
        let mut reference: Option<CMatrix> = None;
        for e in &basis {
            match t.condition_on_past(k, e) {
                Ok((fut, p)) if p > 1e-10 => match &reference {
                    None => reference = Some(fut.choi),
                    Some(r) => max_dev = max_dev.max(r.max_abs_diff(&fut.choi)),
                },
                _ => {}
            }
        }
    }
    Ok(MarkovVerdict {
        markov: distance <= tol && max_dev <= tol.max(1e-8),
        distance,
        max_conditional_dev: max_dev,
    })
}

/// Quantum conditional mutual information S(F : H | M) of the normalized
/// Choi state, where H is the earliest `n_h` factors and M the next `n_m`.
pub fn qcmi(t: &ProcessTensor, n_h: usize, n_m: usize) -> Result<f64> {
    let nf = t.slots.len();
    if n_h + n_m >= nf {
        return Err(Error::BadParam(format!(
            "split H={n_h}, M={n_m} leaves no future out of {nf} factors"
        )));
    }
    let rho = t.normalized_choi();
    let hm: Vec<usize> = (0..n_h + n_m).collect();
    let mf: Vec<usize> = (n_h..nf).collect();
    let monly: Vec<usize> = (n_h..n_h + n_m).collect();
    let s_hm = vn_entropy_mat(&rho.partial_trace(&hm)?)?;
    let s_mf = vn_entropy_mat(&rho.partial_trace(&mf)?)?;
    let s_m = if monly.is_empty() {
        0.0
    } else {
        vn_entropy_mat(&rho.partial_trace(&monly)?)?
    };
    let s_all = vn_entropy_mat(&rho)?;
    Ok(s_hm + s_mf - s_m - s_all)
}

/// Operator-Schmidt rank of a square matrix across the bipartition that puts
/// the first `n_a` factors on one side.
pub fn operator_schmidt_rank(m: &CMatrix, n_a: usize) -> Result<usize> {
    let dims = m.dims();
    let da: usize = dims[..n_a].iter().product();
    let db: usize = dims[n_a..].iter().product();
    let mut r = CMatrix::zeros(&[da * da], &[db * db]);
    for ia in 0..da {
        for ib in 0..db {
            for ja in 0..da {
                for jb in 0..db {
                    r.set(
                        ia * da + ja,
                        ib * db + jb,
                        m.get(ia * db + ib, ja * db + jb),
                    );
                }
            }
        }
    }
    let sv = singular_values(&r)?;
    let smax = sv.first().copied().unwrap_or(0.0);
    // ties at the threshold count as correlated
    Ok(sv.iter().filter(|&&s| s > 1e-9 * smax.max(1e-300)).count())
}

#[derive(Debug, Clone, Serialize)]
pub struct MarkovOrderReport {
    pub pass: bool,
    /// Per instrument element: (outcome probability, mutual information
    /// across the F|H cut, operator-Schmidt rank).
    pub per_element: Vec<(f64, f64, usize)>,
}

/// Tests instrument-dependent Markov order: every element of the instrument
/// on the memory block must split the conditioned process into a product
/// across the F|H cut.
pub fn markov_order_test(
    t: &ProcessTensor,
    n_h: usize,
    n_m: usize,
    instrument: &[CMatrix],
    tol: f64,
) -> Result<MarkovOrderReport> {
    let nf = t.slots.len();
    if n_h + n_m >= nf || n_h == 0 {
        return Err(Error::BadParam("split needs nonempty H and F".into()));
    }
    let m_factors: Vec<usize> = (n_h..n_h + n_m).collect();
    let mut per_element = Vec::new();
    let mut pass = true;
    for a in instrument {
        let x = contract_factors(&t.choi, &m_factors, a)?;
        let tr = x.trace().re;
        if tr <= 1e-12 {
            per_element.push((tr, 0.0, 1));
            continue;
        }
        let xn = x.scale(cr(1.0 / tr));
        let mi = crate::qla::q_mutual_info(&xn, &(0..n_h).collect::<Vec<_>>())?;
        let rank = operator_schmidt_rank(&xn, n_h)?;
        if mi > tol || rank > 1 {
            pass = false;
        }
        per_element.push((tr, mi, rank));
    }
    Ok(MarkovOrderReport { pass, per_element })
}

/// General form of a process tensor with finite Markov order for a declared
/// instrument: sum_x H_x (x) Delta_x^* (x) F_x plus complement terms
/// (FH-correlated factors attached to the basis-completion duals). Factors
/// are assembled in chronological (H, M, F) order.
pub fn build_finite_order(
    histories: &[CMatrix],
    duals_m: &[CMatrix],
    futures: &[CMatrix],
    complements: &[(CMatrix, CMatrix)],
    slots: Vec<Slot>,
    n_h: usize,
    n_m: usize,
) -> Result<ProcessTensor> {
    if histories.len() != duals_m.len() || histories.len() != futures.len() {
        return Err(Error::DimMismatch(
            "histories, duals, and futures must align".into(),
        ));
    }
    let dims: Vec<usize> = slots.iter().map(|s| s.d).collect();
    let nf = slots.len();
    let mut choi = CMatrix::square_zeros(&dims);
    for ((h, d), f) in histories.iter().zip(duals_m).zip(futures) {
        choi = choi.add(&h.kron(&d.conj()).kron(f));
    }
    for (hf, dual) in complements {
        // hf carries (H, F) factors; interleave the M dual back in
        let term = hf.kron(&dual.conj());
        // current order (H, F, M) -> chronological (H, M, F)
        let n_f = nf - n_h - n_m;
        let mut perm: Vec<usize> = (0..n_h).collect();
        perm.extend(n_h + n_f..nf);
        perm.extend(n_h..n_h + n_f);
        choi = choi.add(&term.reorder_factors(&perm)?);
    }
    let choi = choi.with_dims(&dims, &dims)?;
    let t = ProcessTensor::new(slots, choi)?;
    let report = t.check_causality();
    if !report.pass {
        return Err(Error::NotCausal(format!(
            "finite-order ingredients violate causality: {:?}",
            report.levels
        )));
    }
    Ok(t)
}

/// Classical-flag process with Markov order one relative to the projective
/// z instrument at the middle time: history (0i, 0o), memory (1i), future
/// (1o, 2i). `m_weights` are the PSD effects on 0o deciding the flag and
/// `futures` the channels applied after each outcome.
pub fn classical_flag_process(
    rho0: &CMatrix,
    m_weights: &[CMatrix; 2],
    futures: &[Channel; 2],
) -> Result<ProcessTensor> {
    let sum = m_weights[0].add(&m_weights[1]);
    if sum.max_abs_diff(&CMatrix::identity(&[2])) > 1e-10 {
        return Err(Error::BadParam(
            "flag weights must sum to the identity".into(),
        ));
    }
    let histories: Vec<CMatrix> = m_weights.iter().map(|w| rho0.kron(w)).collect();
    let duals: Vec<CMatrix> = (0..2)
        .map(|x| CMatrix::projector(&CMatrix::basis_ket(2, x)))
        .collect();
    let futs: Vec<CMatrix> = futures.iter().map(op_element).collect();
    let slots = vec![
        Slot { t: 0, dir: SlotDir::In, d: 2 },
        Slot { t: 0, dir: SlotDir::Out, d: 2 },
        Slot { t: 1, dir: SlotDir::In, d: 2 },
        Slot { t: 1, dir: SlotDir::Out, d: 2 },
        Slot { t: 2, dir: SlotDir::In, d: 2 },
    ];
    build_finite_order(&histories, &duals, &futs, &[], slots, 2, 1)
}

/// Rebuilds a finite-order process from its memory-history marginal through
/// the recovery construction; exact when the duals are positive.
pub fn finite_order_recover(
    t: &ProcessTensor,
    n_h: usize,
    n_m: usize,
    instrument: &[CMatrix],
    duals_m: &[CMatrix],
    futures: &[CMatrix],
) -> Result<CMatrix> {
    let hm_factors: Vec<usize> = (0..n_h + n_m).collect();
    let d_f_out: usize = t.slots[n_h + n_m..]
        .iter()
        .filter(|s| s.dir == SlotDir::Out)
        .map(|s| s.d)
        .product();
    let upsilon_mh = t.choi.partial_trace(&hm_factors)?.scale(cr(1.0 / d_f_out as f64));
    let m_local: Vec<usize> = (n_h..n_h + n_m).collect();
    let mut rebuilt = CMatrix::square_zeros(t.choi.dims());
    for ((a, dual), f) in instrument.iter().zip(duals_m).zip(futures) {
        let c_x = f.trace().re;
        if c_x <= 1e-14 {
            continue;
        }
        let h_cond = contract_factors(&upsilon_mh, &m_local, a)?;
        let term = h_cond
            .kron(&dual.conj())
            .kron(f)
            .scale(cr(d_f_out as f64 / c_x));
        rebuilt = rebuilt.add(&term);
    }
    Ok(rebuilt)
}

/// Bond dimensions of the chronological matrix-product factorization. The
/// MPO sites group the slots as 0i | 0o 1i | 1o 2i | ..., so each bond sits
/// right after an input slot; for a Markov product every rank is one.
pub fn mpo_bond_dims(t: &ProcessTensor) -> Result<Vec<usize>> {
    let mut dims = Vec::new();
    for (idx, s) in t.slots.iter().enumerate() {
        if s.dir == SlotDir::In && idx + 1 < t.slots.len() {
            dims.push(operator_schmidt_rank(&t.choi, idx + 1)?);
        }
    }
    Ok(dims)
}

/// Inferred intermediate map E_(t:0) . E_(s:0)^{-1} with a CP verdict.
pub fn infer_divisor(e_t0: &Channel, e_s0: &Channel) -> Result<(Channel, bool)> {
    let s_t = e_t0.superop();
    let s_s = e_s0.superop();
    let sv = singular_values(&s_s)?;
    let smax = sv.first().copied().unwrap_or(0.0);
    let smin = sv.last().copied().unwrap_or(0.0);
    if smin <= 1e-10 * smax.max(1.0) {
        return Err(Error::Singular(smin));
    }
    let zeta = s_t.mul(&inv(&s_s)?);
    let ch = Channel::from_superop(zeta, e_s0.d_in, e_t0.d_out)?;
    // composition must reproduce the longer map
    let resid = ch
        .superop()
        .mul(&s_s)
        .max_abs_diff(&e_t0.superop());
    if resid > 1e-9 {
        return Err(Error::NoConvergence(format!(
            "divisor reproduces the endpoint map only within {resid:.3e}"
        )));
    }
    let (cp, _witness) = ch.is_cp()?;
    Ok((ch, cp))
}

#[derive(Debug, Clone, Serialize)]
pub struct SnapshotReport {
    pub generator: CMatrix,
    /// max deviation of exp(L t) from the input superoperator
    pub reproduction_residual: f64,
    /// is exp(L s) completely positive for all sampled s in (0, t]?
    pub cp_for_all_sampled: bool,
    pub sampled: Vec<(f64, f64)>,
}

/// Extracts the time-independent generator from one snapshot of a map family
/// through the principal matrix logarithm of its superoperator. Eigenvalues
/// near the negative real axis abort with a branch-cut diagnostic.
pub fn snapshot_generator(ch: &Channel, t: f64, samples: usize) -> Result<SnapshotReport> {
    if t <= 0.0 {
        return Err(Error::BadParam(format!("snapshot time {t}")));
    }
    let s = ch.superop();
    let l = logm(&s)?.scale(cr(1.0 / t));
    let rebuilt = expm(&l.scale(cr(t)))?;
    let reproduction_residual = rebuilt.max_abs_diff(&s);
    if reproduction_residual > 1e-8 {
        return Err(Error::NoConvergence(format!(
            "exp(L t) reproduces the map only within {reproduction_residual:.3e}"
        )));
    }
    let d = ch.d_in;
    let mut cp_for_all_sampled = true;
    let mut sampled = Vec::new();
    for i in 1..=samples {
        let si = t * i as f64 / samples as f64;
        let e_s = expm(&l.scale(cr(si)))?;
        let tmp = Channel::from_superop(e_s, d, d)?;
        let (cp, witness) = tmp.is_cp()?;
        if !cp {
            cp_for_all_sampled = false;
        }
        sampled.push((si, witness));
    }
    Ok(SnapshotReport {
        generator: l,
        reproduction_residual,
        cp_for_all_sampled,
        sampled,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BlpReport {
    /// (time label, trace distance)
    pub series: Vec<(f64, f64)>,
    /// true when the distance never increases beyond 1e-9
    pub monotone: bool,
}

fn monotone(series: &[(f64, f64)]) -> bool {
    series.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-9)
}

/// Trace-distance witness on a one-parameter channel family.
pub fn blp_family(
    ts: &[f64],
    family: impl Fn(f64) -> Result<Channel>,
    rho: &CMatrix,
    sigma: &CMatrix,
) -> Result<BlpReport> {
    let mut series = Vec::with_capacity(ts.len());
    for &t in ts {
        let ch = family(t)?;
        let d = trace_distance(&ch.apply(rho)?, &ch.apply(sigma)?)?;
        series.push((t, d));
    }
    let m = monotone(&series);
    Ok(BlpReport { series, monotone: m })
}

/// Trace-distance witness on a two-step process tensor with a leading
/// preparation slot: distances at times 0, 1, and 2, with an optional
/// intervention applied at the middle time.
pub fn blp_on_two_step(
    t: &ProcessTensor,
    rho: &CMatrix,
    sigma: &CMatrix,
    intervention: Option<&Channel>,
) -> Result<BlpReport> {
    let times = t.times();
    if times.len() != 3 || t.slots[0].dir != SlotDir::Out {
        return Err(Error::SlotMismatch(
            "expected a two-step tensor with a leading preparation slot".into(),
        ));
    }
    let d0 = trace_distance(rho, sigma)?;
    let first = t.reduce(&times[..2])?;
    let r1 = first.output_state(&[TimeOp::Prepare(rho.clone())])?;
    let s1 = first.output_state(&[TimeOp::Prepare(sigma.clone())])?;
    let d1 = trace_distance(&r1, &s1)?;
    let mid = match intervention {
        Some(ch) => op_element(ch),
        None => CMatrix::max_entangled(t.slots[1].d)?,
    };
    let last = t.contract_time(times[1], &mid)?;
    let r2 = last.output_state(&[TimeOp::Prepare(rho.clone())])?;
    let s2 = last.output_state(&[TimeOp::Prepare(sigma.clone())])?;
    let d2 = trace_distance(&r2, &s2)?;
    let series = vec![(0.0, d0), (1.0, d1), (2.0, d2)];
    let m = monotone(&series);
    Ok(BlpReport { series, monotone: m })
}

/// Summary report for a process tensor.
#[derive(Debug, Clone, Serialize)]
pub struct MemoryReport {
    pub markov: bool,
    pub rel_entropy_measure: f64,
    pub confusion: [f64; 3],
    pub schatten_p: f64,
    /// Schatten-p distance to the product of marginals: an upper bound on
    /// the distance to the Markov set (the bound, not the minimum).
    pub schatten_bound: f64,
    pub qcmi: f64,
    pub bond_dims: Vec<usize>,
    pub markov_distance: f64,
    pub max_conditional_dev: f64,
}

pub fn memory_report(
    t: &ProcessTensor,
    n_h: usize,
    n_m: usize,
    schatten_p: f64,
) -> Result<MemoryReport> {
    let verdict = is_markov(t, 1e-8)?;
    let (n_r, confusion) = nonmarkov_rel_entropy(t)?;
    let markov = closest_markov(t)?;
    let diff = t.normalized_choi().sub(&markov.normalized_choi());
    let schatten_bound = schatten_norm(&diff, schatten_p)?;
    let q = if n_h > 0 && n_h + n_m < t.slots.len() {
        qcmi(t, n_h, n_m)?
    } else {
        0.0
    };
    Ok(MemoryReport {
        markov: verdict.markov,
        rel_entropy_measure: n_r,
        confusion,
        schatten_p,
        schatten_bound,
        qcmi: q,
        bond_dims: mpo_bond_dims(t)?,
        markov_distance: verdict.distance,
        max_conditional_dev: verdict.max_conditional_dev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{channel_factory, identity_channel, ChannelKind};
    use crate::qla::herm_eig;
    use crate::proctensor::{
        markov_tensor, process_from_circuit, shallow_pocket, CircuitProcess,
    };
    use crate::qla::{pauli, qubit_ket};
    use crate::random::{random_density, random_unitary, rng_from_seed};

    fn dephasing(gt: f64) -> Channel {
        channel_factory(ChannelKind::Dephasing { gamma_t: gt }).unwrap()
    }

    fn correlated_two_step(seed: u64) -> ProcessTensor {
        let mut rng = rng_from_seed(seed);
        let rho_s = random_density(&mut rng, 2);
        let rho_e = CMatrix::projector(&CMatrix::basis_ket(2, 0));
        let rho_se = rho_s.kron(&rho_e);
        // entangling step followed by a swap-like step: the environment
        // carries system information across the middle time
        let cnot = CMatrix::from_real(
            &[2, 2],
            &[
                1.0, 0.0, 0.0, 0.0,
                0.0, 1.0, 0.0, 0.0,
                0.0, 0.0, 0.0, 1.0,
                0.0, 0.0, 1.0, 0.0,
            ],
        )
        .unwrap();
        let swap = CMatrix::from_real(
            &[2, 2],
            &[
                1.0, 0.0, 0.0, 0.0,
                0.0, 0.0, 1.0, 0.0,
                0.0, 1.0, 0.0, 0.0,
                0.0, 0.0, 0.0, 1.0,
            ],
        )
        .unwrap();
        process_from_circuit(&CircuitProcess {
            rho_se: rho_se.with_dims(&[2, 2], &[2, 2]).unwrap(),
            unitaries: vec![cnot, swap],
        })
        .unwrap()
    }

    #[test]
    fn closest_markov_fixes_products() {
        let mut rng = rng_from_seed(70);
        let rho = random_density(&mut rng, 2);
        let t = markov_tensor(&rho, &[dephasing(0.3), dephasing(0.8)]).unwrap();
        let m = closest_markov(&t).unwrap();
        assert!(m.choi.max_abs_diff(&t.choi) < 1e-12);

        // shallow pocket: product of two dephasing steps (partial-trace oracle)
        let sp = shallow_pocket(0.7).unwrap();
        let m = closest_markov(&sp).unwrap();
        let expect = op_element(&dephasing(0.7)).kron(&op_element(&dephasing(0.7)));
        assert!(m.choi.max_abs_diff(&expect) < 1e-12);
        assert!(m.check_causality().pass);

        // random correlated circuit: the marginal product is still causal
        let t = correlated_two_step(71);
        let m = closest_markov(&t).unwrap();
        assert!(m.check_causality().pass);
    }

    #[test]
    fn rel_entropy_measure_behaviour() {
        let mut rng = rng_from_seed(72);
        let rho = random_density(&mut rng, 2);
        let t = markov_tensor(&rho, &[dephasing(0.4), dephasing(1.0)]).unwrap();
        let (n_r, confusion) = nonmarkov_rel_entropy(&t).unwrap();
        assert!(n_r < 1e-9, "Markov tensor has N_R = {n_r}");
        assert!((confusion[0] - 1.0).abs() < 1e-8);

        let sp = shallow_pocket(2.0).unwrap();
        let (n_r, confusion) = nonmarkov_rel_entropy(&sp).unwrap();
        assert!(n_r > 1e-3, "shallow pocket N_R = {n_r}");
        assert!(confusion[2] < confusion[0]);
        // independent oracle: for the product-of-marginals reference the
        // relative entropy equals the sum of marginal entropies minus the
        // joint entropy
        let s_joint = vn_entropy_mat(&sp.normalized_choi()).unwrap();
        let s1 = vn_entropy_mat(&born_marginal(&sp, &[0, 1]).unwrap().scale(cr(0.5))).unwrap();
        let s2 = vn_entropy_mat(&born_marginal(&sp, &[2, 3]).unwrap().scale(cr(0.5))).unwrap();
        let direct = s1 + s2 - s_joint;
        assert!((n_r - direct).abs() < 1e-9, "{n_r} vs {direct}");

        // monotone under discarding the last time
        let reduced = sp.reduce(&[0, 1]).unwrap();
        let (n_r_red, _) = nonmarkov_rel_entropy(&reduced).unwrap();
        assert!(n_r_red <= n_r + 1e-9);
    }

    #[test]
    fn markov_verdicts() {
        let mut rng = rng_from_seed(73);
        let rho = random_density(&mut rng, 2);
        let t = markov_tensor(&rho, &[dephasing(0.2), dephasing(0.9)]).unwrap();
        let v = is_markov(&t, 1e-8).unwrap();
        assert!(v.markov, "{v:?}");

        let sp = shallow_pocket(1.0).unwrap();
        let v = is_markov(&sp, 1e-8).unwrap();
        assert!(!v.markov);
        assert!(v.max_conditional_dev > 1e-3);

        // conditional futures differ between the identity and X breaks
        let idn = identity_channel(2);
        let x = channel_factory(ChannelKind::Unitary(pauli(1))).unwrap();
        let fut_i = sp.contract_time(1, &op_element(&idn)).unwrap();
        let fut_x = sp.contract_time(1, &op_element(&x)).unwrap();
        assert!(fut_i.choi.max_abs_diff(&fut_x.choi) > 0.1);

        // a small correlated perturbation flips the verdict at tight tol
        let m = closest_markov(&sp).unwrap();
        let eps = 1e-3;
        let mixed = m.choi.scale(cr(1.0 - eps)).add(&sp.choi.scale(cr(eps)));
        let t = ProcessTensor::new(sp.slots.clone(), mixed).unwrap();
        let v = is_markov(&t, 1e-6).unwrap();
        assert!(!v.markov);
    }

    #[test]
    fn qcmi_values() {
        // product tensor: zero across any split
        let mut rng = rng_from_seed(74);
        let rho = random_density(&mut rng, 2);
        let t = markov_tensor(&rho, &[dephasing(0.5), dephasing(0.5)]).unwrap();
        assert!(qcmi(&t, 1, 2).unwrap().abs() < 1e-9);

        // classical flag process with orthogonal projectors: QCMI vanishes
        let w0 = CMatrix::from_real(&[2], &[0.7, 0.0, 0.0, 0.2]).unwrap();
        let w1 = CMatrix::identity(&[2]).sub(&w0);
        let f0 = identity_channel(2);
        let f1 = channel_factory(ChannelKind::Unitary(pauli(1))).unwrap();
        let t = classical_flag_process(
            &random_density(&mut rng, 2),
            &[w0, w1],
            &[f0.clone(), f1.clone()],
        )
        .unwrap();
        let q = qcmi(&t, 2, 1).unwrap();
        assert!(q.abs() < 1e-8, "QCMI = {q}");

        // non-commuting duals: the same structure built on a skewed basis
        // keeps correlations visible to the QCMI
        let p_plus = CMatrix::projector(&qubit_ket("x+"));
        let p_zero = CMatrix::projector(&qubit_ket("0"));
        let duals = crate::tomo::dual_set(&[
            p_zero.clone(),
            p_plus.clone(),
            pauli(2),
            CMatrix::projector(&qubit_ket("1")),
        ])
        .unwrap();
        let histories = [
            random_density(&mut rng, 2).kron(&CMatrix::identity(&[2]).scale(cr(0.5))),
            random_density(&mut rng, 2).kron(&CMatrix::identity(&[2]).scale(cr(0.5))),
        ];
        let futs = [op_element(&f0), op_element(&f1)];
        let slots = vec![
            Slot { t: 0, dir: SlotDir::In, d: 2 },
            Slot { t: 0, dir: SlotDir::Out, d: 2 },
            Slot { t: 1, dir: SlotDir::In, d: 2 },
            Slot { t: 1, dir: SlotDir::Out, d: 2 },
            Slot { t: 2, dir: SlotDir::In, d: 2 },
        ];
        if let Ok(t) = build_finite_order(
            &histories,
            &duals.duals[..2].to_vec(),
            &futs,
            &[],
            slots,
            2,
            1,
        ) {
            let q = qcmi(&t, 2, 1).unwrap();
            assert!(q > 1e-4, "QCMI with non-commuting duals = {q}");
        }
    }

    #[test]
    fn markov_order_instrument_dependence() {
        let mut rng = rng_from_seed(75);
        let rho0 = random_density(&mut rng, 2);
        let w0 = CMatrix::from_real(&[2], &[0.8, 0.0, 0.0, 0.3]).unwrap();
        let w1 = CMatrix::identity(&[2]).sub(&w0);
        let futures = [
            identity_channel(2),
            channel_factory(ChannelKind::Unitary(pauli(1))).unwrap(),
        ];
        let t = classical_flag_process(&rho0, &[w0, w1], &futures).unwrap();
        // the declared projective instrument splits the process
        let projectors: Vec<CMatrix> = (0..2)
            .map(|x| CMatrix::projector(&CMatrix::basis_ket(2, x)))
            .collect();
        let rep = markov_order_test(&t, 2, 1, &projectors, 1e-8).unwrap();
        assert!(rep.pass, "{rep:?}");

        // a random unitary-rotated projective instrument generally fails
        let mut fails = 0;
        let trials = 50;
        for seed in 0..trials {
            let mut rng = rng_from_seed(1000 + seed);
            let u = random_unitary(&mut rng, 2);
            let els: Vec<CMatrix> = (0..2)
                .map(|x| {
                    let v = u.mul(&CMatrix::basis_ket(2, x));
                    CMatrix::projector(&v)
                })
                .collect();
            let rep = markov_order_test(&t, 2, 1, &els, 1e-8).unwrap();
            if !rep.pass {
                fails += 1;
            }
        }
        assert!(
            fails * 10 >= trials * 9,
            "only {fails}/{trials} random instruments detected correlations"
        );
    }

    #[test]
    fn finite_order_recovery_with_positive_duals() {
        let mut rng = rng_from_seed(76);
        let rho0 = random_density(&mut rng, 2);
        let w0 = CMatrix::from_real(&[2], &[0.6, 0.0, 0.0, 0.4]).unwrap();
        let w1 = CMatrix::identity(&[2]).sub(&w0);
        let futures = [
            dephasing(0.3),
            channel_factory(ChannelKind::Unitary(pauli(1))).unwrap(),
        ];
        let t = classical_flag_process(&rho0, &[w0, w1], &futures).unwrap();
        let projectors: Vec<CMatrix> = (0..2)
            .map(|x| CMatrix::projector(&CMatrix::basis_ket(2, x)))
            .collect();
        let futs: Vec<CMatrix> = futures.iter().map(op_element).collect();
        let rec = finite_order_recover(&t, 2, 1, &projectors, &projectors, &futs).unwrap();
        assert!(
            rec.max_abs_diff(&t.choi) < 1e-9,
            "recovery residual {}",
            rec.max_abs_diff(&t.choi)
        );
    }

    #[test]
    fn bond_dimensions() {
        let mut rng = rng_from_seed(77);
        let rho = random_density(&mut rng, 2);
        let t = markov_tensor(&rho, &[dephasing(0.4), dephasing(0.2)]).unwrap();
        assert_eq!(mpo_bond_dims(&t).unwrap(), vec![1, 1]);

        let sp = shallow_pocket(0.9).unwrap();
        let bonds = mpo_bond_dims(&sp).unwrap();
        // the middle cut carries memory
        assert_eq!(bonds.len(), 1);
        assert!(bonds[0] > 1, "bonds {bonds:?}");

        // a unitary circuit with a qubit environment has bond at most 4
        let t = correlated_two_step(78);
        let bonds = mpo_bond_dims(&t).unwrap();
        for b in &bonds {
            assert!(*b <= 4, "bonds {bonds:?}");
        }
        assert!(bonds.iter().any(|&b| b > 1));
    }

    #[test]
    fn divisor_inference() {
        // dephasing family: CP for all sampled t > s
        for (s, t) in [(0.2, 0.5), (0.5, 1.0), (1.0, 2.5)] {
            let e_s = dephasing(s);
            let e_t = dephasing(t);
            let (zeta, cp) = infer_divisor(&e_t, &e_s).unwrap();
            assert!(cp, "dephasing divisor NCP at ({s}, {t})");
            // the divisor is itself the dephasing of the gap
            let expect = dephasing(t - s);
            assert!(zeta.choi().max_abs_diff(&expect.choi()) < 1e-9);
        }
        // oscillatory family: some intermediate map fails CP
        let family = |wt: f64| channel_factory(ChannelKind::XzOscillatory { omega_t: wt }).unwrap();
        let mut saw_ncp = false;
        for (s, t) in [(0.3, 0.6), (0.6, 0.9), (0.9, 1.2), (0.2, 1.0)] {
            if let Ok((_zeta, cp)) = infer_divisor(&family(t), &family(s)) {
                if !cp {
                    saw_ncp = true;
                }
            }
        }
        assert!(saw_ncp, "oscillatory family never failed divisibility");
        // unitary family: the divisor is unitary
        let u = |theta: f64| {
            let h = pauli(1).scale(crate::qla::c(0.0, -theta));
            channel_factory(ChannelKind::Unitary(expm(&h).unwrap())).unwrap()
        };
        let (zeta, cp) = infer_divisor(&u(0.9), &u(0.4)).unwrap();
        assert!(cp);
        let (evals, _) = herm_eig(&zeta.choi()).unwrap();
        assert!((evals[0] - 2.0).abs() < 1e-9 && evals[1].abs() < 1e-9);
        // singular intermediate map is rejected
        let dead = channel_factory(ChannelKind::Depolarizing {
            p: [0.25, 0.25, 0.25, 0.25],
        })
        .unwrap();
        assert!(matches!(
            infer_divisor(&dephasing(1.0), &dead),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn snapshot_generators() {
        // dephasing: L = (gamma/2)(Z . Z - id), CP for all sampled s
        let gamma = 0.8;
        let rep = snapshot_generator(&dephasing(gamma), 1.0, 10).unwrap();
        assert!(rep.cp_for_all_sampled);
        let z = pauli(3);
        let dissipator = z
            .kron(&z.conj())
            .sub(&CMatrix::identity(&[2, 2]))
            .scale(cr(gamma / 2.0));
        assert!(
            rep.generator.max_abs_diff(&dissipator) < 1e-9,
            "generator diff {}",
            rep.generator.max_abs_diff(&dissipator)
        );

        // unitary family: generator reproduces and stays CP
        let theta = 0.7;
        let h = pauli(1).scale(crate::qla::c(0.0, -theta));
        let u = channel_factory(ChannelKind::Unitary(expm(&h).unwrap())).unwrap();
        let rep = snapshot_generator(&u, 1.0, 8).unwrap();
        assert!(rep.cp_for_all_sampled);
        assert!(rep.reproduction_residual < 1e-9);

        // oscillatory family: the principal log hits the branch cut
        let xz = channel_factory(ChannelKind::XzOscillatory { omega_t: 1.0 }).unwrap();
        let out = snapshot_generator(&xz, 1.0, 8);
        assert!(
            matches!(out, Err(Error::LogBranchCut(_))),
            "snapshot unexpectedly succeeded"
        );
    }

    #[test]
    fn blp_witnesses() {
        let plus = CMatrix::projector(&qubit_ket("x+"));
        let minus = CMatrix::projector(&qubit_ket("x-"));
        // dephasing family: monotone exp(-gamma t)
        let ts: Vec<f64> = (0..=10).map(|i| i as f64 * 0.3).collect();
        let rep = blp_family(
            &ts,
            |t| channel_factory(ChannelKind::Dephasing { gamma_t: t }),
            &plus,
            &minus,
        )
        .unwrap();
        assert!(rep.monotone);
        for (t, d) in &rep.series {
            assert!((d - (-t).exp()).abs() < 1e-10);
        }

        // shallow pocket with X at the middle time: revival to full distance
        let gt = 1.1;
        let sp = shallow_pocket(gt).unwrap();
        let x = channel_factory(ChannelKind::Unitary(pauli(1))).unwrap();
        let rep = blp_on_two_step(&sp, &plus, &minus, Some(&x)).unwrap();
        assert!(!rep.monotone, "{rep:?}");
        assert!((rep.series[1].1 - (-gt).exp()).abs() < 1e-10);
        assert!((rep.series[2].1 - 1.0).abs() < 1e-10);
        // without the intervention the distance keeps shrinking
        let rep = blp_on_two_step(&sp, &plus, &minus, None).unwrap();
        assert!(rep.monotone);
        assert!((rep.series[2].1 - (-2.0 * gt).exp()).abs() < 1e-10);

        // Markov tensor: monotone under arbitrary interventions
        let slots = vec![
            Slot { t: 0, dir: SlotDir::Out, d: 2 },
            Slot { t: 1, dir: SlotDir::In, d: 2 },
            Slot { t: 1, dir: SlotDir::Out, d: 2 },
            Slot { t: 2, dir: SlotDir::In, d: 2 },
        ];
        let product = op_element(&dephasing(0.4)).kron(&op_element(&dephasing(0.6)));
        let t = ProcessTensor::new(slots, product).unwrap();
        for seed in 0..5u64 {
            let intervention = channel_factory(ChannelKind::RandomCptp {
                seed: 1100 + seed,
                d: 2,
                rank: 2,
            })
            .unwrap();
            let rep = blp_on_two_step(&t, &plus, &minus, Some(&intervention)).unwrap();
            assert!(rep.monotone, "{rep:?}");
        }
    }

    #[test]
    fn rel_entropy_and_verdict_agree_on_product_and_correlated_suites() {
        // N_R vanishes exactly when the Markov verdict holds, over thirty
        // product tensors and thirty correlated circuits
        for seed in 0..30u64 {
            let mut rng = rng_from_seed(3000 + seed);
            let rho = random_density(&mut rng, 2);
            let c1 = channel_factory(ChannelKind::RandomCptp {
                seed: 3100 + seed,
                d: 2,
                rank: 1 + (seed as usize % 4),
            })
            .unwrap();
            let c2 = channel_factory(ChannelKind::RandomCptp {
                seed: 3200 + seed,
                d: 2,
                rank: 1 + (seed as usize % 3),
            })
            .unwrap();
            let t = markov_tensor(&rho, &[c1, c2]).unwrap();
            let (n_r, _) = nonmarkov_rel_entropy(&t).unwrap();
            let v = is_markov(&t, 1e-8).unwrap();
            assert!(n_r <= 1e-8 && v.markov, "product seed {seed}: N_R {n_r}, {v:?}");
            // the Schatten-1 bound to the marginal product vanishes too
            let m = closest_markov(&t).unwrap();
            let bound =
                trace_norm(&t.normalized_choi().sub(&m.normalized_choi())).unwrap();
            assert!(bound <= 1e-7);
        }
        for seed in 0..30u64 {
            let t = correlated_two_step(4000 + seed);
            let (n_r, _) = nonmarkov_rel_entropy(&t).unwrap();
            let v = is_markov(&t, 1e-8).unwrap();
            assert!(
                n_r > 1e-8 && !v.markov,
                "correlated seed {seed}: N_R {n_r}, {v:?}"
            );
        }
    }

    #[test]
    fn memory_report_summary() {
        let mut rng = rng_from_seed(80);
        let rho = random_density(&mut rng, 2);
        let t = markov_tensor(&rho, &[dephasing(0.3), dephasing(0.5)]).unwrap();
        let rep = memory_report(&t, 1, 2, 1.0).unwrap();
        assert!(rep.markov);
        assert!(rep.rel_entropy_measure <= 1e-8);
        assert!(rep.bond_dims.iter().all(|&b| b == 1));
        assert!(rep.schatten_bound < 1e-7);

        let sp = shallow_pocket(1.0).unwrap();
        let rep = memory_report(&sp, 2, 1, 1.0).unwrap();
        assert!(!rep.markov);
        assert!(rep.rel_entropy_measure > 1e-3);
        assert!(rep.schatten_bound > 1e-3);
    }
}
