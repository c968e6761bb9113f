//! Multi-time process tensors: construction from circuits, the link product,
//! causality checks, reduction and conditioning, reconstruction from
//! operation statistics, and the worked multi-time models.
//!
//! Conventions. The Choi matrix of a process is laid out over chronological
//! slots `0i, 0o, 1i, 1o, ..., ki`: at each time the process first emits a
//! state into the `i` slot (the instrument's input), then accepts the
//! instrument's output on the `o` slot. A process may begin with a bare `o`
//! slot when the experimenter feeds the very first state in. The tensor is
//! kept unnormalized with trace = product of the `o`-slot dimensions, and
//! instrument sequences contract against it through the spatiotemporal Born
//! rule `P = tr[Choi * element^T]`, where a product element is the Kronecker
//! product of per-time operation Chois in slot order `(i, o)`.

use crate::channels::Channel;
use crate::error::{Error, Result};
use crate::qla::{cr, herm_eig, CMatrix, ONE};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlotDir {
    #[serde(rename = "i")]
    In,
    #[serde(rename = "o")]
    Out,
}

/// One labeled tensor-factor of a process Choi matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub t: usize,
    pub dir: SlotDir,
    pub d: usize,
}

/// Choi matrix of a multi-time process plus labeled time-slot spaces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProcessTensor {
    pub slots: Vec<Slot>,
    pub choi: CMatrix,
}

/// Per-level causality residuals; pass iff every residual is at most 1e-8.
#[derive(Debug, Clone, Serialize)]
pub struct CausalityReport {
    pub psd_witness: f64,
    pub trace_residual: f64,
    pub levels: Vec<(String, f64)>,
    pub pass: bool,
}

/// Operation supplied per time when contracting a process tensor.
pub enum TimeOp<'a> {
    /// CP map acting at a full (i, o) time.
    Map(&'a Channel),
    /// Raw operation Choi over the time's slots, already in slot order.
    Element(CMatrix),
    /// POVM effect at a final input-only time.
    Effect(CMatrix),
    /// State fed into a leading output-only time.
    Prepare(CMatrix),
    /// Do nothing: identity map, or the unit effect at a final time.
    Identity,
}

/// Operation Choi of a CP map in slot order (in, out); realizes
/// `(I (x) M)[|Phi+><Phi+|]`, the factor swap of the channel Choi.
pub fn op_element(ch: &Channel) -> CMatrix {
    ch.choi().reorder_factors(&[1, 0]).unwrap()
}

/// Tester factor of a POVM effect at a final time.
pub fn effect_element(e: &CMatrix) -> CMatrix {
    e.transpose()
}

/// Tester factor of a state preparation at a leading output-only time.
pub fn prep_element(rho: &CMatrix) -> CMatrix {
    rho.clone()
}

impl ProcessTensor {
    pub fn new(slots: Vec<Slot>, choi: CMatrix) -> Result<Self> {
        let dims: Vec<usize> = slots.iter().map(|s| s.d).collect();
        if choi.rows_dims() != dims.as_slice() || !choi.is_square() {
            return Err(Error::SlotMismatch(format!(
                "Choi dims {:?} do not match slots {:?}",
                choi.rows_dims(),
                dims
            )));
        }
        for w in slots.windows(2) {
            let ok = match (w[0].t, w[0].dir, w[1].t, w[1].dir) {
                (t0, SlotDir::In, t1, SlotDir::Out) if t0 == t1 => true,
                (t0, SlotDir::Out, t1, SlotDir::In) if t1 == t0 + 1 => true,
                _ => false,
            };
            if !ok {
                return Err(Error::SlotMismatch(format!(
                    "slots out of chronological order: {w:?}"
                )));
            }
        }
        if let Some(last) = slots.last() {
            if last.dir != SlotDir::In {
                return Err(Error::SlotMismatch(
                    "a process tensor ends on an input slot".into(),
                ));
            }
        }
        Ok(ProcessTensor { slots, choi })
    }

    /// Distinct times, ascending.
    pub fn times(&self) -> Vec<usize> {
        let mut ts: Vec<usize> = self.slots.iter().map(|s| s.t).collect();
        ts.dedup();
        ts
    }

    /// Factor indices of the given time.
    pub fn slots_of_time(&self, t: usize) -> Vec<usize> {
        self.slots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.t == t)
            .map(|(i, _)| i)
            .collect()
    }

    /// Product of the output-slot dimensions (the Born-rule normalization).
    pub fn out_dim(&self) -> usize {
        self.slots
            .iter()
            .filter(|s| s.dir == SlotDir::Out)
            .map(|s| s.d)
            .product()
    }

    /// Assembles the product tester element for per-time operations.
    pub fn product_element(&self, ops: &[TimeOp]) -> Result<CMatrix> {
        let times = self.times();
        if ops.len() != times.len() {
            return Err(Error::SlotMismatch(format!(
                "{} operations supplied for {} times",
                ops.len(),
                times.len()
            )));
        }
        let mut parts: Vec<CMatrix> = Vec::with_capacity(times.len());
        for (op, &t) in ops.iter().zip(&times) {
            let fs = self.slots_of_time(t);
            let local: Vec<Slot> = fs.iter().map(|&i| self.slots[i]).collect();
            let full = local.len() == 2;
            let d = local[0].d;
            let part = match op {
                TimeOp::Map(ch) => {
                    if !full {
                        return Err(Error::SlotMismatch(format!(
                            "time {t} is not a full (i, o) slot pair"
                        )));
                    }
                    op_element(ch)
                }
                TimeOp::Element(m) => {
                    let want: usize = local.iter().map(|s| s.d).product();
                    if m.nrows() != want {
                        return Err(Error::SlotMismatch(format!(
                            "element at time {t} has side {}, slots need {want}",
                            m.nrows()
                        )));
                    }
                    m.clone()
                }
                TimeOp::Effect(e) => {
                    if full || local[0].dir != SlotDir::In {
                        return Err(Error::SlotMismatch(format!(
                            "effect supplied at non-final time {t}"
                        )));
                    }
                    effect_element(e)
                }
                TimeOp::Prepare(rho) => {
                    if full || local[0].dir != SlotDir::Out {
                        return Err(Error::SlotMismatch(format!(
                            "preparation supplied at non-leading time {t}"
                        )));
                    }
                    prep_element(rho)
                }
                TimeOp::Identity => {
                    if full {
                        op_element(&crate::channels::identity_channel(d))
                    } else if local[0].dir == SlotDir::In {
                        CMatrix::identity(&[d])
                    } else {
                        return Err(Error::SlotMismatch(format!(
                            "identity cannot fill the bare preparation slot at time {t}"
                        )));
                    }
                }
            };
            parts.push(part);
        }
        let mut out = parts[0].clone();
        for p in &parts[1..] {
            out = out.kron(p);
        }
        Ok(out)
    }

    /// Spatiotemporal Born rule P = tr[Choi element^T] for a full tester
    /// element over all slots.
    pub fn born_element(&self, element: &CMatrix) -> Result<f64> {
        if element.nrows() != self.choi.nrows() {
            return Err(Error::SlotMismatch(format!(
                "tester element side {} vs process side {}",
                element.nrows(),
                self.choi.nrows()
            )));
        }
        Ok(self.choi.mul(&element.transpose()).trace().re)
    }

    /// Born rule for per-time product operations.
    pub fn born_multi(&self, ops: &[TimeOp]) -> Result<f64> {
        let element = self.product_element(ops)?;
        self.born_element(&element)
    }

    /// Contracts all but the final time and returns the (subnormalized)
    /// output state at the last slot.
    pub fn output_state(&self, ops: &[TimeOp]) -> Result<CMatrix> {
        let times = self.times();
        if ops.len() + 1 != times.len() {
            return Err(Error::SlotMismatch(format!(
                "{} operations supplied for {} non-final times",
                ops.len(),
                times.len() - 1
            )));
        }
        let last = *times.last().unwrap();
        let final_slots = self.slots_of_time(last);
        if final_slots.len() != 1 {
            return Err(Error::SlotMismatch(
                "final time must be an input-only slot".into(),
            ));
        }
        let mut parts: Vec<CMatrix> = Vec::new();
        for (op, &t) in ops.iter().zip(&times) {
            let fs = self.slots_of_time(t);
            let local: Vec<Slot> = fs.iter().map(|&i| self.slots[i]).collect();
            let part = match op {
                TimeOp::Map(ch) => op_element(ch),
                TimeOp::Element(m) => m.clone(),
                TimeOp::Prepare(rho) => prep_element(rho),
                TimeOp::Identity => {
                    if local.len() == 2 {
                        op_element(&crate::channels::identity_channel(local[0].d))
                    } else {
                        return Err(Error::SlotMismatch(
                            "identity cannot fill a bare slot here".into(),
                        ));
                    }
                }
                TimeOp::Effect(_) => {
                    return Err(Error::SlotMismatch(
                        "effects belong to the final time only".into(),
                    ))
                }
            };
            parts.push(part);
        }
        let mut element = parts[0].clone();
        for p in &parts[1..] {
            element = element.kron(p);
        }
        let non_final: Vec<usize> = (0..self.slots.len() - 1).collect();
        contract_factors(&self.choi, &non_final, &element)
    }

    /// Hierarchy of trace conditions plus positivity; report-only.
    pub fn check_causality(&self) -> CausalityReport {
        let mut levels = Vec::new();
        let scale = self.choi.max_abs().max(1.0);
        let psd_witness = match herm_eig(&self.choi.herm_part()) {
            Ok((evals, _)) => {
                let herm = self.choi.herm_residual();
                evals.last().copied().unwrap_or(0.0).min(-herm).min(0.0)
            }
            Err(_) => -f64::INFINITY,
        };
        let trace_residual = (self.choi.trace().re - self.out_dim() as f64).abs()
            + self.choi.trace().im.abs();
        let mut work = self.choi.clone();
        let mut slots = self.slots.clone();
        while !slots.is_empty() {
            let last = *slots.last().unwrap();
            match last.dir {
                SlotDir::In => {
                    // trace the final input slot
                    let keep: Vec<usize> = (0..slots.len() - 1).collect();
                    work = match work.partial_trace(&keep) {
                        Ok(w) => w,
                        Err(_) => break,
                    };
                    slots.pop();
                    if slots.is_empty() {
                        let r = (work.get(0, 0) - ONE).norm();
                        levels.push(("terminal trace".into(), r));
                    }
                }
                SlotDir::Out => {
                    // the tensor must factor as 1_o (x) rest
                    let o_idx = slots.len() - 1;
                    let keep: Vec<usize> = (0..o_idx).collect();
                    let rest = match work.partial_trace(&keep) {
                        Ok(w) => w.scale(cr(1.0 / last.d as f64)),
                        Err(_) => break,
                    };
                    let expect = if keep.is_empty() {
                        CMatrix::identity(&[last.d]).scale(rest.get(0, 0))
                    } else {
                        rest.kron(&CMatrix::identity(&[last.d]))
                            .reorder_factors(&{
                                let mut perm: Vec<usize> = (0..o_idx).collect();
                                perm.push(o_idx);
                                perm
                            })
                            .unwrap()
                    };
                    let r = work.max_abs_diff(&expect) / scale;
                    levels.push((format!("tr_{{{}i}} level at {}o", last.t + 1, last.t), r));
                    work = rest;
                    slots.pop();
                    if slots.is_empty() {
                        levels.push(("terminal preparation slot".into(), 0.0));
                    }
                }
            }
        }
        let pass = psd_witness >= -1e-8 * scale
            && trace_residual <= 1e-8 * scale
            && levels.iter().all(|(_, r)| *r <= 1e-8);
        CausalityReport {
            psd_witness,
            trace_residual,
            levels,
            pass,
        }
    }

    /// Contracts one full (i, o) time with an operation element and removes
    /// it from the slot list. No renormalization is applied.
    pub fn contract_time(&self, t: usize, element: &CMatrix) -> Result<ProcessTensor> {
        let fs = self.slots_of_time(t);
        if fs.len() != 2 {
            return Err(Error::SlotMismatch(format!(
                "time {t} is not a full (i, o) pair"
            )));
        }
        let reduced = contract_factors(&self.choi, &fs, element)?;
        let slots: Vec<Slot> = self
            .slots
            .iter()
            .copied()
            .filter(|s| s.t != t)
            .collect();
        Ok(ProcessTensor {
            slots,
            choi: reduced,
        })
    }

    /// Inserts the identity map at a time: the GET-consistent way of
    /// marginalizing an intermediate time.
    pub fn insert_identity(&self, t: usize) -> Result<ProcessTensor> {
        let fs = self.slots_of_time(t);
        if fs.len() != 2 {
            return Err(Error::SlotMismatch(format!(
                "cannot insert the identity at the bare time {t}"
            )));
        }
        let d = self.slots[fs[0]].d;
        self.contract_time(t, &CMatrix::max_entangled(d)?)
    }

    /// Reduced process tensor on the kept times. Later times may always be
    /// dropped (they trace out against any CPTP choice); intermediate times
    /// are replaced by the identity map; dropping the earliest time is a
    /// conditional operation and is rejected here.
    pub fn reduce(&self, keep_times: &[usize]) -> Result<ProcessTensor> {
        let times = self.times();
        let mut keep: Vec<usize> = keep_times.to_vec();
        keep.sort_unstable();
        keep.dedup();
        if keep.is_empty() {
            return Err(Error::BadParam("cannot reduce to zero times".into()));
        }
        for &t in &keep {
            if !times.contains(&t) {
                return Err(Error::SlotMismatch(format!("time {t} not in tensor")));
            }
        }
        if keep[0] != times[0] {
            return Err(Error::SlotMismatch(
                "dropping the earliest time requires conditioning on a specified operation"
                    .into(),
            ));
        }
        let mut out = self.clone();
        // drop trailing times: trace the final input slot, then peel the
        // dangling output slot at 1/d
        let mut trailing: Vec<usize> = times
            .iter()
            .copied()
            .filter(|t| *t > *keep.last().unwrap())
            .collect();
        trailing.sort_unstable_by(|a, b| b.cmp(a));
        for t in trailing {
            let fs = out.slots_of_time(t);
            let keep_f: Vec<usize> = (0..out.slots.len())
                .filter(|i| !fs.contains(i))
                .collect();
            let mut w = out.choi.partial_trace(&keep_f)?;
            let mut slots: Vec<Slot> = keep_f.iter().map(|&i| out.slots[i]).collect();
            // peel the now-dangling output slot of the previous time
            if let Some(last) = slots.last().copied() {
                if last.dir == SlotDir::Out {
                    let keep_f2: Vec<usize> = (0..slots.len() - 1).collect();
                    w = w.partial_trace(&keep_f2)?.scale(cr(1.0 / last.d as f64));
                    slots.pop();
                }
            }
            out = ProcessTensor { slots, choi: w };
        }
        // replace dropped intermediate times by identity maps
        let mut intermediate: Vec<usize> = out
            .times()
            .into_iter()
            .filter(|t| !keep.contains(t))
            .collect();
        intermediate.sort_unstable_by(|a, b| b.cmp(a));
        for t in intermediate {
            out = out.insert_identity(t)?;
        }
        Ok(out)
    }

    /// Causal break at step `k`: contract the past (all slots before `k o`)
    /// with a tester element ending in a measurement at `k i`, renormalize,
    /// and return the conditional future tensor together with the outcome
    /// probability.
    pub fn condition_on_past(
        &self,
        k: usize,
        past_element: &CMatrix,
    ) -> Result<(ProcessTensor, f64)> {
        let past: Vec<usize> = self
            .slots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.t < k || (s.t == k && s.dir == SlotDir::In))
            .map(|(i, _)| i)
            .collect();
        if past.is_empty() || past.len() == self.slots.len() {
            return Err(Error::SlotMismatch(format!(
                "causal break at {k} leaves no past or no future"
            )));
        }
        let x = contract_factors(&self.choi, &past, past_element)?;
        let future_slots: Vec<Slot> = (0..self.slots.len())
            .filter(|i| !past.contains(i))
            .map(|i| self.slots[i])
            .collect();
        let d_out: usize = future_slots
            .iter()
            .filter(|s| s.dir == SlotDir::Out)
            .map(|s| s.d)
            .product();
        let p = x.trace().re / d_out as f64;
        if p <= 1e-12 {
            return Err(Error::ZeroProbability(p));
        }
        let choi = x.scale(cr(1.0 / p));
        Ok((ProcessTensor {
            slots: future_slots,
            choi,
        }, p))
    }

    /// Trace-1 normalized copy of the Choi matrix.
    pub fn normalized_choi(&self) -> CMatrix {
        let tr = self.choi.trace().re;
        self.choi.scale(cr(1.0 / tr))
    }
}

/// Contracts the listed factors of `m` against `element^T` and returns the
/// matrix on the remaining factors: tr_listed[m (element^T (x) 1_rest)].
pub fn contract_factors(m: &CMatrix, factors: &[usize], element: &CMatrix) -> Result<CMatrix> {
    let rest: Vec<usize> = (0..m.num_factors()).filter(|i| !factors.contains(i)).collect();
    let cdims: Vec<usize> = factors.iter().map(|&i| m.dims()[i]).collect();
    if element.nrows() != cdims.iter().product::<usize>() || !element.is_square() {
        return Err(Error::SlotMismatch(format!(
            "element side {} does not match contracted factors {:?}",
            element.nrows(),
            cdims
        )));
    }
    // lift element^T (x) 1_rest into the original factor order
    let et = element.transpose().with_dims(&cdims, &cdims)?;
    let lifted = CMatrix::embed_op(&et, factors, m.dims())?;
    m.mul(&lifted).partial_trace(&rest)
}

/// A matrix with opaque factor labels, the operand of [`link_product`].
#[derive(Debug, Clone)]
pub struct LabeledChoi {
    pub mat: CMatrix,
    pub labels: Vec<u32>,
}

impl LabeledChoi {
    pub fn new(mat: CMatrix, labels: Vec<u32>) -> Result<Self> {
        if mat.num_factors() != labels.len() || !mat.is_square() {
            return Err(Error::SlotMismatch(format!(
                "{} labels for {} factors",
                labels.len(),
                mat.num_factors()
            )));
        }
        Ok(LabeledChoi { mat, labels })
    }
}

/// Link product C * A: partial transpose of A on the shared labels,
/// multiply, trace the shared labels. The result carries A's unshared labels
/// followed by C's unshared labels.
pub fn link_product(c: &LabeledChoi, a: &LabeledChoi) -> Result<LabeledChoi> {
    let shared: Vec<u32> = a
        .labels
        .iter()
        .copied()
        .filter(|l| c.labels.contains(l))
        .collect();
    for s in &shared {
        let da = a.mat.dims()[a.labels.iter().position(|l| l == s).unwrap()];
        let dc = c.mat.dims()[c.labels.iter().position(|l| l == s).unwrap()];
        if da != dc {
            return Err(Error::SlotMismatch(format!(
                "shared label {s} has dims {da} vs {dc}"
            )));
        }
    }
    let a_only: Vec<u32> = a
        .labels
        .iter()
        .copied()
        .filter(|l| !shared.contains(l))
        .collect();
    let c_only: Vec<u32> = c
        .labels
        .iter()
        .copied()
        .filter(|l| !shared.contains(l))
        .collect();
    // reorder a to (shared, a_only), c to (shared, c_only)
    let perm_for = |labels: &[u32], target: &[u32]| -> Vec<usize> {
        target
            .iter()
            .map(|l| labels.iter().position(|x| x == l).unwrap())
            .collect()
    };
    let mut a_target = shared.clone();
    a_target.extend(&a_only);
    let mut c_target = shared.clone();
    c_target.extend(&c_only);
    let am = a.mat.reorder_factors(&perm_for(&a.labels, &a_target))?;
    let cm = c.mat.reorder_factors(&perm_for(&c.labels, &c_target))?;
    // partial transpose of A on the shared factors
    let shared_idx: Vec<usize> = (0..shared.len()).collect();
    let am = am.partial_transpose(&shared_idx)?;
    // lift both to (shared, a_only, c_only)
    let adims: Vec<usize> = a_only
        .iter()
        .map(|l| am.dims()[shared.len() + a_target[shared.len()..].iter().position(|x| x == l).unwrap()])
        .collect();
    let cdims: Vec<usize> = c_only
        .iter()
        .map(|l| cm.dims()[shared.len() + c_target[shared.len()..].iter().position(|x| x == l).unwrap()])
        .collect();
    let na = shared.len() + a_only.len();
    let a_lift = if c_only.is_empty() {
        am
    } else {
        am.kron(&CMatrix::identity(&cdims))
    };
    let c_lift = if a_only.is_empty() {
        cm
    } else {
        let big = cm.kron(&CMatrix::identity(&adims));
        // current order (shared, c_only, a_only) -> want (shared, a_only, c_only)
        let mut perm: Vec<usize> = (0..shared.len()).collect();
        perm.extend((0..a_only.len()).map(|i| shared.len() + c_only.len() + i));
        perm.extend((0..c_only.len()).map(|i| shared.len() + i));
        big.reorder_factors(&perm)?
    };
    let prod = c_lift.mul(&a_lift);
    let keep: Vec<usize> = (shared.len()..na + c_only.len()).collect();
    let result = prod.partial_trace(&keep)?;
    let mut labels = a_only;
    labels.extend(c_only);
    Ok(LabeledChoi {
        mat: result,
        labels,
    })
}

/// A finite list of elements over the same slots that sums to a causally
/// ordered whole; the multi-time generalization of an instrument.
#[derive(Debug, Clone)]
pub struct Tester {
    pub slots: Vec<Slot>,
    pub elements: Vec<CMatrix>,
}

impl Tester {
    /// Validates positivity of each element and the mirrored trace hierarchy
    /// of the sum (the roles of i and o exchanged relative to a process).
    pub fn new(slots: Vec<Slot>, elements: Vec<CMatrix>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::BadInstrument("empty tester".into()));
        }
        let mut sum = CMatrix::square_zeros(elements[0].dims());
        for e in &elements {
            let (evals, _) = herm_eig(&e.herm_part())?;
            let lmax = evals.first().copied().unwrap_or(0.0).max(1.0);
            if evals.last().copied().unwrap_or(0.0) < -1e-9 * lmax {
                return Err(Error::NotPsd(evals.last().copied().unwrap()));
            }
            sum = sum.add(e);
        }
        check_tester_hierarchy(&sum, &slots)?;
        Ok(Tester { slots, elements })
    }

    /// Product tester from per-time instruments, one element per outcome
    /// combination (row-major over outcome indices).
    pub fn product(slots: Vec<Slot>, per_time: &[Vec<CMatrix>]) -> Result<Self> {
        let mut elements = vec![CMatrix::identity(&[] as &[usize])];
        for opts in per_time {
            let mut next = Vec::with_capacity(elements.len() * opts.len());
            for e in &elements {
                for o in opts {
                    next.push(e.kron(o));
                }
            }
            elements = next;
        }
        Tester::new(slots, elements)
    }
}

/// Mirrored trace hierarchy for tester sums: peeling from the earliest time,
/// tracing each `o` slot must leave the identity on the matching `i` slot.
fn check_tester_hierarchy(sum: &CMatrix, slots: &[Slot]) -> Result<()> {
    let mut work = sum.clone();
    let mut remaining: Vec<Slot> = slots.to_vec();
    loop {
        match remaining.first().copied() {
            None => return Ok(()),
            Some(s) if s.dir == SlotDir::Out => {
                // leading preparation slot of a tester: trace it at weight 1
                let keep: Vec<usize> = (1..remaining.len()).collect();
                // a preparation factor must carry unit trace overall; fold it in
                work = work.partial_trace(&keep)?;
                remaining.remove(0);
            }
            Some(s) => {
                if remaining.len() == 1 {
                    // final measurement: sum of effects is the identity (transposed)
                    let resid = work.max_abs_diff(&CMatrix::identity(&[s.d]));
                    if resid > 1e-8 {
                        return Err(Error::BadInstrument(format!(
                            "tester effects sum to identity only within {resid:.3e}"
                        )));
                    }
                    return Ok(());
                }
                // trace the o slot (index 1) and demand identity on the i slot
                let keep: Vec<usize> = (0..remaining.len()).filter(|&i| i != 1).collect();
                let traced = work.partial_trace(&keep)?;
                let rest_keep: Vec<usize> = (1..keep.len()).collect();
                let rest = traced.partial_trace(&rest_keep)?.scale(cr(1.0 / s.d as f64));
                let expect = CMatrix::identity(&[s.d]).kron(&rest);
                let resid = traced.max_abs_diff(&expect) / sum.max_abs().max(1.0);
                if resid > 1e-8 {
                    return Err(Error::BadInstrument(format!(
                        "tester hierarchy fails at time {} (residual {resid:.3e})",
                        s.t
                    )));
                }
                work = rest;
                remaining.drain(0..2);
            }
        }
    }
}

/// Initial system-environment state and the interleaving unitaries of a
/// multi-time circuit; the generative model behind process tensors.
#[derive(Debug, Clone)]
pub struct CircuitProcess {
    /// Joint state over factors [system, environment].
    pub rho_se: CMatrix,
    /// System-environment unitaries, one per step, over [system, environment].
    pub unitaries: Vec<CMatrix>,
}

impl CircuitProcess {
    pub fn d_s(&self) -> usize {
        self.rho_se.dims()[0]
    }

    pub fn d_e(&self) -> usize {
        self.rho_se.dims()[1]
    }

    pub fn steps(&self) -> usize {
        self.unitaries.len()
    }

    fn validate(&self) -> Result<()> {
        if self.rho_se.num_factors() != 2 {
            return Err(Error::DimMismatch(
                "rho_se must carry [system, environment] factors".into(),
            ));
        }
        let (ds, de) = (self.d_s(), self.d_e());
        for u in &self.unitaries {
            if u.dims() != [ds, de] {
                return Err(Error::DimMismatch(format!(
                    "unitary dims {:?} vs system/environment ({ds}, {de})",
                    u.dims()
                )));
            }
            let resid = u
                .dagger()
                .mul(u)
                .max_abs_diff(&CMatrix::identity(&[ds, de]));
            if resid > 1e-9 {
                return Err(Error::BadParam(format!(
                    "circuit map is not unitary (residual {resid:.3e})"
                )));
            }
        }
        Ok(())
    }

    /// Direct density-matrix simulation of one instrument sequence: CP maps
    /// on the system interleaved with the circuit unitaries; returns the
    /// sequence probability.
    pub fn simulate_sequence(&self, ops: &[&Channel], final_effect: &CMatrix) -> Result<f64> {
        if ops.len() != self.steps() {
            return Err(Error::DimMismatch(format!(
                "{} operations for {} steps",
                ops.len(),
                self.steps()
            )));
        }
        let (ds, de) = (self.d_s(), self.d_e());
        let mut state = self.rho_se.clone();
        for (op, u) in ops.iter().zip(&self.unitaries) {
            // apply the CP map on the system factor
            let mut next = CMatrix::square_zeros(&[ds, de]);
            for k in op.kraus()? {
                let lift = k.kron(&CMatrix::identity(&[de]));
                next = next.add(&lift.mul(&state).mul(&lift.dagger()));
            }
            state = u.mul(&next).mul(&u.dagger());
        }
        let sys = state.partial_trace(&[0])?;
        Ok(sys.mul(final_effect).trace().re)
    }
}

/// Choi state of the process generated by a circuit: at each time, half of an
/// unnormalized maximally entangled pair is fed into the process. Slots run
/// `0i, 0o, ..., ki`.
pub fn process_from_circuit(circuit: &CircuitProcess) -> Result<ProcessTensor> {
    circuit.validate()?;
    let ds = circuit.d_s();
    // factor layout: [0i, E, then appended (j o, live)] with live renamed j+1 i
    let mut w = circuit.rho_se.clone();
    let mut slots = vec![Slot {
        t: 0,
        dir: SlotDir::In,
        d: ds,
    }];
    for (j, u) in circuit.unitaries.iter().enumerate() {
        w = w.kron(&CMatrix::max_entangled(ds)?);
        // factors: [.., E at 1, .., j_o, live]
        let nf = w.num_factors();
        let live = nf - 1;
        let env = 1usize;
        let full_u = CMatrix::embed_op(u, &[live, env], w.dims())?;
        w = full_u.mul(&w).mul(&full_u.dagger());
        slots.push(Slot {
            t: j,
            dir: SlotDir::Out,
            d: ds,
        });
        slots.push(Slot {
            t: j + 1,
            dir: SlotDir::In,
            d: ds,
        });
    }
    // trace out the environment (factor 1) and restore slot order
    let keep: Vec<usize> = (0..w.num_factors()).filter(|&i| i != 1).collect();
    let choi = w.partial_trace(&keep)?;
    ProcessTensor::new(slots, choi)
}

/// Superchannel of a (possibly correlated) initial state and one unitary
/// step: the one-slot process tensor over `0i, 0o, 1i`.
pub fn superchannel_build(rho_se: &CMatrix, u: &CMatrix) -> Result<ProcessTensor> {
    process_from_circuit(&CircuitProcess {
        rho_se: rho_se.clone(),
        unitaries: vec![u.clone()],
    })
}

/// Product-form process tensor of a Markov process: initial state and a chain
/// of CPTP maps, `rho_0 (x) Choi(E_1) (x) ... (x) Choi(E_k)` in slot order.
pub fn markov_tensor(rho0: &CMatrix, chain: &[Channel]) -> Result<ProcessTensor> {
    let d0 = rho0.nrows();
    if (rho0.trace().re - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDensity(format!(
            "initial state trace {}",
            rho0.trace().re
        )));
    }
    let mut slots = vec![Slot {
        t: 0,
        dir: SlotDir::In,
        d: d0,
    }];
    let mut choi = rho0.clone();
    let mut d_prev = d0;
    for (j, ch) in chain.iter().enumerate() {
        if ch.d_in != d_prev {
            return Err(Error::DimMismatch(format!(
                "chain link {j} has input dim {} but previous output is {d_prev}",
                ch.d_in
            )));
        }
        let (cp, w) = ch.is_cp()?;
        if !cp {
            return Err(Error::NotCp(w));
        }
        let (tp, r) = ch.is_tp()?;
        if !tp {
            return Err(Error::NotTp(r));
        }
        choi = choi.kron(&op_element(ch));
        slots.push(Slot {
            t: j,
            dir: SlotDir::Out,
            d: ch.d_in,
        });
        slots.push(Slot {
            t: j + 1,
            dir: SlotDir::In,
            d: ch.d_out,
        });
        d_prev = ch.d_out;
    }
    ProcessTensor::new(slots, choi)
}

/// Three-time Stern-Gerlach demo: |x+> initial state, trivial dynamics.
pub fn stern_gerlach_tensor() -> ProcessTensor {
    let plus = CMatrix::projector(&crate::qla::qubit_ket("x+"));
    let id = crate::channels::identity_channel(2);
    markov_tensor(&plus, &[id.clone(), id]).unwrap()
}

/// Shallow pocket model over times {0, t, 2t}: a qubit dephasing through a
/// Lorentzian environment, handled analytically through the overlap
/// tr[u_t^n |psi_E><psi_E|] = exp(-gamma |n| t / 2). Slots are
/// `0o, 1i, 1o, 2i` (the experimenter feeds the state at time 0).
pub fn shallow_pocket(gamma_t: f64) -> Result<ProcessTensor> {
    if gamma_t < 0.0 {
        return Err(Error::BadParam(format!("gamma*t = {gamma_t} negative")));
    }
    let overlap = |n: i32| cr((-gamma_t * f64::from(n.abs()) / 2.0).exp());
    let sign = |b: usize| if b == 0 { 1i32 } else { -1i32 };
    let mut choi = CMatrix::square_zeros(&[2, 2, 2, 2]);
    for l in 0..2usize {
        for j in 0..2usize {
            for n in 0..2usize {
                for m in 0..2usize {
                    // row (l, l, j, j), column (n, n, m, m)
                    let row = l * 8 + l * 4 + j * 2 + j;
                    let col = n * 8 + n * 4 + m * 2 + m;
                    let power = sign(l) + sign(j) - sign(n) - sign(m);
                    choi.set(row, col, overlap(power));
                }
            }
        }
    }
    let slots = vec![
        Slot { t: 0, dir: SlotDir::Out, d: 2 },
        Slot { t: 1, dir: SlotDir::In, d: 2 },
        Slot { t: 1, dir: SlotDir::Out, d: 2 },
        Slot { t: 2, dir: SlotDir::In, d: 2 },
    ];
    ProcessTensor::new(slots, choi)
}

/// The 4x4 block of the shallow pocket tensor in the compressed basis
/// {|00>, |11>} per time pair; every other element vanishes.
pub fn shallow_pocket_compressed(t: &ProcessTensor) -> CMatrix {
    let mut block = CMatrix::square_zeros(&[2, 2]);
    for j in 0..2usize {
        for l in 0..2usize {
            for m in 0..2usize {
                for n in 0..2usize {
                    // compressed |j l> with j the later pair, l the earlier pair
                    let row_full = l * 8 + l * 4 + j * 2 + j;
                    let col_full = n * 8 + n * 4 + m * 2 + m;
                    block.set(j * 2 + l, m * 2 + n, t.choi.get(row_full, col_full));
                }
            }
        }
    }
    block
}

/// Operation basis for process reconstruction at one time: elements in slot
/// order together with their duals.
#[derive(Debug, Clone)]
pub struct SlotBasis {
    pub elements: Vec<CMatrix>,
    pub duals: Vec<CMatrix>,
}

impl SlotBasis {
    pub fn from_elements(elements: Vec<CMatrix>) -> Result<Self> {
        let duals = crate::tomo::dual_set(&elements)?.duals;
        Ok(SlotBasis { elements, duals })
    }

    /// The 16-element prepare-and-measure basis for a full qubit time slot.
    pub fn qubit_ops() -> Self {
        let elements: Vec<CMatrix> = crate::tomo::qubit_op_basis()
            .iter()
            .map(op_element)
            .collect();
        Self::from_elements(elements).unwrap()
    }

    /// Effect basis for the final input-only qubit slot.
    pub fn qubit_effects() -> Self {
        let elements: Vec<CMatrix> = crate::tomo::qubit_state_basis()
            .iter()
            .map(effect_element)
            .collect();
        Self::from_elements(elements).unwrap()
    }

    /// Preparation basis for a leading output-only qubit slot.
    pub fn qubit_preps() -> Self {
        Self::from_elements(crate::tomo::qubit_state_basis()).unwrap()
    }

    /// Random informationally complete operation basis for a full qubit
    /// time slot, built from prepare-and-measure maps over random kets.
    pub fn random_qubit_ops(seed: crate::random::Seed) -> Self {
        let mut rng = crate::random::rng_from_seed(seed);
        loop {
            let preps: Vec<CMatrix> =
                (0..4).map(|_| crate::random::random_ket(&mut rng, 2)).collect();
            let meas: Vec<CMatrix> =
                (0..4).map(|_| crate::random::random_ket(&mut rng, 2)).collect();
            let mut elements = Vec::with_capacity(16);
            for p in &preps {
                for q in &meas {
                    let mut k = CMatrix::square_zeros(&[2]);
                    for r in 0..2 {
                        for s in 0..2 {
                            k.set(r, s, p.get(r, 0) * q.get(s, 0).conj());
                        }
                    }
                    let ch = Channel::from_kraus(vec![k]).unwrap();
                    elements.push(op_element(&ch));
                }
            }
            if crate::tomo::matrix_span_rank(&elements) == 16 {
                if let Ok(basis) = Self::from_elements(elements) {
                    return basis;
                }
            }
        }
    }
}

/// Enumerates the probabilities of every basis sequence, row-major over per
/// time outcome indices (earliest time slowest). Runs data-parallel.
pub fn collect_probs(t: &ProcessTensor, bases: &[SlotBasis]) -> Result<Vec<f64>> {
    let counts: Vec<usize> = bases.iter().map(|b| b.elements.len()).collect();
    let total: usize = counts.iter().product();
    let out = crate::par::map_indexed(total, |flat| {
        let element = sequence_element(bases, &counts, flat);
        t.born_element(&element).unwrap_or(f64::NAN)
    });
    if out.iter().any(|p| p.is_nan()) {
        return Err(Error::SlotMismatch("basis does not match slots".into()));
    }
    Ok(out)
}

/// Sequential twin of [`collect_probs`] for benchmarking.
pub fn collect_probs_seq(t: &ProcessTensor, bases: &[SlotBasis]) -> Result<Vec<f64>> {
    let counts: Vec<usize> = bases.iter().map(|b| b.elements.len()).collect();
    let total: usize = counts.iter().product();
    let out = crate::par::map_indexed_seq(total, |flat| {
        let element = sequence_element(bases, &counts, flat);
        t.born_element(&element).unwrap_or(f64::NAN)
    });
    if out.iter().any(|p| p.is_nan()) {
        return Err(Error::SlotMismatch("basis does not match slots".into()));
    }
    Ok(out)
}

fn sequence_element(bases: &[SlotBasis], counts: &[usize], flat: usize) -> CMatrix {
    let mut idx = vec![0usize; counts.len()];
    let mut rem = flat;
    for j in (0..counts.len()).rev() {
        idx[j] = rem % counts[j];
        rem /= counts[j];
    }
    let mut e = bases[0].elements[idx[0]].clone();
    for j in 1..counts.len() {
        e = e.kron(&bases[j].elements[idx[j]]);
    }
    e
}

/// Rebuilds the process Choi from basis-sequence probabilities:
/// Choi = sum_x P(x) D_{x_0}^* (x) ... (x) D_{x_k}^* in slot order.
pub fn reconstruct_process(
    probs: &[f64],
    bases: &[SlotBasis],
    slots: Vec<Slot>,
) -> Result<ProcessTensor> {
    let counts: Vec<usize> = bases.iter().map(|b| b.elements.len()).collect();
    let total: usize = counts.iter().product();
    if probs.len() != total {
        return Err(Error::DimMismatch(format!(
            "{} probabilities for {} basis sequences",
            probs.len(),
            total
        )));
    }
    for b in bases {
        let side: usize = b.elements[0].nrows();
        let need = side * side;
        if b.elements.len() != need {
            return Err(Error::NotInformationallyComplete(format!(
                "slot basis has {} elements, needs {need}",
                b.elements.len()
            )));
        }
        if crate::tomo::matrix_span_rank(&b.elements) != need {
            return Err(Error::NotInformationallyComplete(
                "slot basis is linearly dependent".into(),
            ));
        }
    }
    let dims: Vec<usize> = slots.iter().map(|s| s.d).collect();
    let mut choi = CMatrix::square_zeros(&dims);
    for (flat, &p) in probs.iter().enumerate() {
        let mut idx = vec![0usize; counts.len()];
        let mut rem = flat;
        for j in (0..counts.len()).rev() {
            idx[j] = rem % counts[j];
            rem /= counts[j];
        }
        let mut term = bases[0].duals[idx[0]].conj();
        for j in 1..counts.len() {
            term = term.kron(&bases[j].duals[idx[j]].conj());
        }
        choi = choi.add(&term.scale(cr(p)));
    }
    let choi = choi.with_dims(&dims, &dims)?;
    ProcessTensor::new(slots, choi)
}

/// System-environment unitary exp(-i wt XX) exp(-i wt YY) exp(-i wt ZZ) used
/// by the oscillatory two-qubit model.
pub fn xz_unitary(omega_t: f64) -> CMatrix {
    let mut u = CMatrix::identity(&[2, 2]);
    for j in 1..=3 {
        let sigma = crate::qla::pauli(j);
        let a = sigma.kron(&sigma);
        // cos(wt) 1 - i sin(wt) sigma_j (x) sigma_j
        let f = CMatrix::identity(&[2, 2])
            .scale(cr(omega_t.cos()))
            .add(&a.scale(crate::qla::c(0.0, -omega_t.sin())));
        u = u.mul(&f);
    }
    u
}

/// Correlated two-qubit initial state (1 + a.sigma (x) 1 + g sigma_y (x)
/// sigma_z)/4.
pub fn xz_initial_state(a: [f64; 3], g: f64) -> Result<CMatrix> {
    let mut m = CMatrix::identity(&[2, 2]);
    for (k, ak) in a.iter().enumerate() {
        m = m.add(
            &crate::qla::pauli(k + 1)
                .kron(&CMatrix::identity(&[2]))
                .scale(cr(*ak)),
        );
    }
    m = m.add(&crate::qla::pauli(2).kron(&crate::qla::pauli(3)).scale(cr(g)));
    let m = m.scale(cr(0.25));
    let (evals, _) = herm_eig(&m.herm_part())?;
    if evals.last().copied().unwrap_or(0.0) < -1e-12 {
        return Err(Error::NotPsd(evals.last().copied().unwrap()));
    }
    Ok(m)
}

/// One-slot superchannel of the correlated oscillatory model.
pub fn initial_correlations_superchannel(
    a: [f64; 3],
    g: f64,
    omega_t: f64,
) -> Result<ProcessTensor> {
    let rho_se = xz_initial_state(a, g)?;
    superchannel_build(&rho_se, &xz_unitary(omega_t))
}

#[allow(unused_imports)]
use crate::qla::ZERO as _Z;
