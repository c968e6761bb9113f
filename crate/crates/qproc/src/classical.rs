//! Classical stochastic processes: joint distributions, stochastic matrices,
//! Markov order, hidden Markov embeddings, conditional mutual information,
//! and data-processing inequalities. All entropies are in nats.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Joint probability tensor over k times, flattened row-major with the
/// earliest time as the slowest index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointDist {
    pub dims: Vec<usize>,
    pub probs: Vec<f64>,
}

impl JointDist {
    pub fn new(dims: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if probs.len() != n {
            return Err(Error::DimMismatch(format!(
                "{} entries for dims {:?}",
                probs.len(),
                dims
            )));
        }
        if probs.iter().any(|&p| p < -1e-15) {
            return Err(Error::BadDistribution("negative probability".into()));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::BadDistribution(format!("total mass {sum}")));
        }
        Ok(JointDist { dims, probs })
    }

    pub fn times(&self) -> usize {
        self.dims.len()
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1usize; self.dims.len()];
        for i in (0..self.dims.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.dims[i + 1];
        }
        s
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        let s = self.strides();
        let flat: usize = idx.iter().zip(&s).map(|(i, st)| i * st).sum();
        self.probs[flat]
    }

    /// Marginal over the kept time indices (ascending original order).
    pub fn marginalize(&self, keep: &[usize]) -> Result<JointDist> {
        let mut keep: Vec<usize> = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        for &t in &keep {
            if t >= self.dims.len() {
                return Err(Error::FactorOutOfRange(t, self.dims.len()));
            }
        }
        let kdims: Vec<usize> = keep.iter().map(|&t| self.dims[t]).collect();
        let kn: usize = kdims.iter().product();
        let mut probs = vec![0.0; kn];
        let mut idx = vec![0usize; self.dims.len()];
        for (flat, &p) in self.probs.iter().enumerate() {
            decompose(flat, &self.dims, &mut idx);
            let mut kflat = 0usize;
            for &t in &keep {
                kflat = kflat * self.dims[t] + idx[t];
            }
            probs[kflat] += p;
        }
        JointDist::new(kdims, probs)
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        shannon(&self.probs)
    }
}

fn decompose(mut flat: usize, dims: &[usize], out: &mut [usize]) {
    for i in (0..dims.len()).rev() {
        out[i] = flat % dims[i];
        flat /= dims[i];
    }
}

pub fn shannon(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}

/// Kolmogorov distance (trace distance) with the 1/2 convention.
pub fn kolmogorov_distance(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

pub fn euclidean_distance(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Relative entropy H(p || q) in nats; infinite on support violation.
pub fn relative_entropy(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a <= 0.0 {
            continue;
        }
        if b <= 0.0 {
            return f64::INFINITY;
        }
        acc += a * (a / b).ln();
    }
    acc
}

/// Mutual information of a bipartite distribution laid out row-major (X
/// slowest).
pub fn mutual_information(joint: &[f64], dx: usize, dy: usize) -> f64 {
    let mut px = vec![0.0; dx];
    let mut py = vec![0.0; dy];
    for x in 0..dx {
        for y in 0..dy {
            px[x] += joint[x * dy + y];
            py[y] += joint[x * dy + y];
        }
    }
    shannon(&px) + shannon(&py) - shannon(joint)
}

/// Column-stochastic transition matrix; columns index the conditioning
/// history, rows the next outcome. Rectangular for higher Markov orders.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StochMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl StochMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimMismatch(format!(
                "{} entries for {rows}x{cols}",
                data.len()
            )));
        }
        if data.iter().any(|&x| x < -1e-15) {
            return Err(Error::BadDistribution(
                "negative transition probability".into(),
            ));
        }
        for c in 0..cols {
            let s: f64 = (0..rows).map(|r| data[r * cols + c]).sum();
            if (s - 1.0).abs() > 1e-10 {
                return Err(Error::BadDistribution(format!(
                    "column {c} sums to {s}"
                )));
            }
        }
        Ok(StochMatrix { rows, cols, data })
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn identity(d: usize) -> Self {
        let mut data = vec![0.0; d * d];
        for i in 0..d {
            data[i * d + i] = 1.0;
        }
        StochMatrix {
            rows: d,
            cols: d,
            data,
        }
    }

    /// Applies the matrix to a distribution (column vector).
    pub fn apply(&self, p: &[f64]) -> Result<Vec<f64>> {
        if p.len() != self.cols {
            return Err(Error::DimMismatch(format!(
                "distribution length {} for {} columns",
                p.len(),
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.get(r, c) * p[c]).sum())
            .collect())
    }

    /// Matrix product self . other (other runs first).
    pub fn compose(&self, other: &StochMatrix) -> Result<StochMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimMismatch(format!(
                "{}x{} . {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut data = vec![0.0; self.rows * other.cols];
        for r in 0..self.rows {
            for c in 0..other.cols {
                data[r * other.cols + c] = (0..self.cols)
                    .map(|k| self.get(r, k) * other.get(k, c))
                    .sum();
            }
        }
        StochMatrix::new(self.rows, other.cols, data)
    }

    pub fn is_bistochastic(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|r| {
                let s: f64 = (0..self.cols).map(|c| self.get(r, c)).sum();
                (s - 1.0).abs() < 1e-10
            })
    }
}

/// Chapman-Kolmogorov: the transition matrix across a chain of steps,
/// `chain[last] . ... . chain[0]`.
pub fn chapman(chain: &[StochMatrix]) -> Result<StochMatrix> {
    let mut acc = chain
        .first()
        .cloned()
        .ok_or_else(|| Error::BadParam("empty chain".into()))?;
    for g in &chain[1..] {
        acc = g.compose(&acc)?;
    }
    Ok(acc)
}

/// Two-point conditional P(r_k | r_j) from a homogeneous chain: the matrix
/// power over `steps` applications.
pub fn two_point_from_chain(transition: &StochMatrix, steps: usize) -> Result<StochMatrix> {
    if transition.rows != transition.cols {
        return Err(Error::NotSquare(transition.rows, transition.cols));
    }
    let mut acc = StochMatrix::identity(transition.rows);
    for _ in 0..steps {
        acc = transition.compose(&acc)?;
    }
    Ok(acc)
}

/// Two-point joint P(r_j, r_k) of a homogeneous chain started from `initial`:
/// the trajectory sum P(r_k | r_j) P(r_j) over the intermediate steps.
pub fn two_point_joint(
    transition: &StochMatrix,
    initial: &[f64],
    j: usize,
    k: usize,
) -> Result<JointDist> {
    if k <= j {
        return Err(Error::BadParam(format!("need k > j, got ({j}, {k})")));
    }
    let p_j = {
        let prop = two_point_from_chain(transition, j)?;
        prop.apply(initial)?
    };
    let cond = two_point_from_chain(transition, k - j)?;
    let d = transition.rows;
    let mut probs = vec![0.0; d * d];
    for rj in 0..d {
        for rk in 0..d {
            probs[rj * d + rk] = cond.get(rk, rj) * p_j[rj];
        }
    }
    JointDist::new(vec![d, d], probs)
}

/// CSV export of the conditional tables P(next | last `history` outcomes):
/// columns `history,outcome,probability`, histories rendered as digit
/// strings (earliest first); zero-probability histories are skipped.
pub fn conditional_table_csv(joint: &JointDist, history: usize) -> Result<String> {
    let k = joint.times();
    if history >= k {
        return Err(Error::BadParam(format!(
            "history {history} leaves no next outcome out of {k} times"
        )));
    }
    let marg: Vec<usize> = (k - history - 1..k).collect();
    let window = joint.marginalize(&marg)?;
    let hdims = &window.dims[..history];
    let hn: usize = hdims.iter().product::<usize>().max(1);
    let d = window.dims[history];
    let mut out = String::from("history,outcome,probability\n");
    let mut idx = vec![0usize; history + 1];
    for h in 0..hn {
        decompose(h, hdims, &mut idx[..history]);
        let weight: f64 = (0..d)
            .map(|x| {
                idx[history] = x;
                window.get(&idx)
            })
            .sum();
        if weight <= 1e-14 {
            continue;
        }
        let label: String = idx[..history].iter().map(|v| v.to_string()).collect();
        for x in 0..d {
            idx[history] = x;
            out.push_str(&format!("{label},{x},{}\n", window.get(&idx) / weight));
        }
    }
    Ok(out)
}

/// A family of joint distributions on labeled time sets, tested for the
/// Kolmogorov consistency conditions.
pub fn consistency_check(family: &[(Vec<usize>, JointDist)]) -> Result<bool> {
    for (times_a, dist_a) in family {
        for (times_b, dist_b) in family {
            if times_a == times_b || !times_a.iter().all(|t| times_b.contains(t)) {
                continue;
            }
            // marginalize b down to a's times
            let keep: Vec<usize> = times_a
                .iter()
                .map(|t| times_b.iter().position(|x| x == t).unwrap())
                .collect();
            let marg = dist_b.marginalize(&keep)?;
            let dev = marg
                .probs
                .iter()
                .zip(&dist_a.probs)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            if dev > 1e-10 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Smallest history length that renders all conditional distributions
/// invariant to deeper history. Conditionals on zero-probability histories
/// are skipped rather than imputed.
pub fn markov_order_estimate(joint: &JointDist) -> Result<usize> {
    let k = joint.times();
    if k < 2 {
        return Err(Error::BadParam("need at least two times".into()));
    }
    'order: for ell in 0..k - 1 {
        // check P(last | previous ell) == P(last | all previous) for every
        // time index where both are defined
        for t in (ell + 1)..k {
            // conditional on the last `ell` outcomes before time t must match
            // the conditional on the full history before t
            let full_times: Vec<usize> = (0..=t).collect();
            let marg = joint.marginalize(&full_times)?;
            let dims = marg.dims.clone();
            let hist_n: usize = dims[..t].iter().product();
            let d = dims[t];
            let mut idx = vec![0usize; t + 1];
            // conditional table keyed by the short history
            let short_len = ell.min(t);
            let shorts: usize = dims[t - short_len..t].iter().product::<usize>().max(1);
            let mut short_cond: Vec<Option<Vec<f64>>> = vec![None; shorts];
            for h in 0..hist_n {
                decompose(h, &dims[..t], &mut idx[..t]);
                let weight: f64 = (0..d)
                    .map(|x| {
                        idx[t] = x;
                        marg.get(&idx)
                    })
                    .sum();
                if weight <= 1e-14 {
                    continue;
                }
                let cond: Vec<f64> = (0..d)
                    .map(|x| {
                        idx[t] = x;
                        marg.get(&idx) / weight
                    })
                    .collect();
                let mut sflat = 0usize;
                for j in (t - short_len)..t {
                    sflat = sflat * dims[j] + idx[j];
                }
                match &short_cond[sflat] {
                    None => short_cond[sflat] = Some(cond),
                    Some(prev) => {
                        let dev = prev
                            .iter()
                            .zip(&cond)
                            .map(|(a, b)| (a - b).abs())
                            .fold(0.0, f64::max);
                        if dev > 1e-9 {
                            continue 'order;
                        }
                    }
                }
            }
        }
        return Ok(ell);
    }
    Ok(k - 1)
}

/// Lifts an order-m transition matrix (d x d^m) to the square one-step map
/// on m-time blocks via the Kronecker-delta embedding.
pub fn hidden_markov_embed(gamma_m: &StochMatrix) -> Result<StochMatrix> {
    let d = gamma_m.rows;
    let hist = gamma_m.cols;
    // hist = d^m
    let mut m = 0usize;
    let mut acc = 1usize;
    while acc < hist {
        acc *= d;
        m += 1;
    }
    if acc != hist {
        return Err(Error::DimMismatch(format!(
            "column count {hist} is not a power of row count {d}"
        )));
    }
    if m == 0 {
        return Err(Error::BadParam("order-zero matrix cannot embed".into()));
    }
    // Xi[(x_k, h_recent), (x~_{k-1}, h_old)] = delta(h match) Gamma[x_k | full h]
    let n = hist;
    let mut data = vec![0.0; n * n];
    let dm1 = hist / d; // d^{m-1}
    for col in 0..n {
        // col encodes (x_{k-1}, ..., x_{k-m}) with x_{k-1} slowest
        for xk in 0..d {
            // new block (x_k, x_{k-1}, ..., x_{k-m+1})
            let new_block = xk * dm1 + col / d;
            data[new_block * n + col] += gamma_m.get(xk, col);
        }
    }
    StochMatrix::new(n, n, data)
}

/// Conditional mutual information H(F : H | M) for a contiguous split of the
/// joint: the earliest `h` times are the history, the next `m` the memory,
/// the remaining times the future.
pub fn cmi(joint: &JointDist, h: usize, m: usize) -> Result<f64> {
    let k = joint.times();
    if h + m >= k {
        return Err(Error::BadParam(format!(
            "split h={h}, m={m} leaves no future out of {k} times"
        )));
    }
    // entropies of (H M F), (H M), (M F), (M)
    let s_hmf = joint.entropy();
    let hm: Vec<usize> = (0..h + m).collect();
    let s_hm = joint.marginalize(&hm)?.entropy();
    let mf: Vec<usize> = (h..k).collect();
    let s_mf = joint.marginalize(&mf)?.entropy();
    let monly: Vec<usize> = (h..h + m).collect();
    let s_m = joint.marginalize(&monly)?.entropy();
    Ok(s_hm + s_mf - s_m - s_hmf)
}

/// Recovery map acting on the memory block alone: rebuilds P(H, M, F) from
/// P(H, M) through P(F | M). Returns the reconstruction error (max deviation).
pub fn recovery_error(joint: &JointDist, h: usize, m: usize) -> Result<f64> {
    let k = joint.times();
    if h + m >= k {
        return Err(Error::BadParam("split leaves no future".into()));
    }
    let hm: Vec<usize> = (0..h + m).collect();
    let p_hm = joint.marginalize(&hm)?;
    let mf: Vec<usize> = (h..k).collect();
    let p_mf = joint.marginalize(&mf)?;
    let monly: Vec<usize> = (h..h + m).collect();
    let p_m = joint.marginalize(&monly)?;
    let dh: usize = joint.dims[..h].iter().product();
    let dm: usize = joint.dims[h..h + m].iter().product();
    let df: usize = joint.dims[h + m..].iter().product();
    let mut worst: f64 = 0.0;
    for ih in 0..dh {
        for im in 0..dm {
            let pm = p_m.probs[im];
            for jf in 0..df {
                let rebuilt = if pm > 1e-14 {
                    p_hm.probs[ih * dm + im] * p_mf.probs[im * df + jf] / pm
                } else {
                    0.0
                };
                let actual = joint.probs[(ih * dm + im) * df + jf];
                worst = worst.max((rebuilt - actual).abs());
            }
        }
    }
    Ok(worst)
}

/// Data-processing report for the three contractive quantities.
#[derive(Debug, Clone, Serialize)]
pub struct DpiReport {
    pub trace_before: f64,
    pub trace_after: f64,
    pub rel_entropy_before: f64,
    pub rel_entropy_after: f64,
    pub mutual_before: f64,
    pub mutual_after: f64,
    pub all_contract: bool,
}

/// Applies the stochastic matrix to both distributions (and to the X
/// marginal of the joint built from p and q as independent pair) and checks
/// the three data-processing inequalities.
pub fn dpi_suite(p: &[f64], q: &[f64], gamma: &StochMatrix) -> Result<DpiReport> {
    let pt = gamma.apply(p)?;
    let qt = gamma.apply(q)?;
    let trace_before = kolmogorov_distance(p, q);
    let trace_after = kolmogorov_distance(&pt, &qt);
    let rel_entropy_before = relative_entropy(p, q);
    let rel_entropy_after = relative_entropy(&pt, &qt);
    // correlated joint: X perfectly correlated with a copy, Gamma on X only
    let dx = p.len();
    let mut joint = vec![0.0; dx * dx];
    for x in 0..dx {
        joint[x * dx + x] = p[x];
    }
    let mutual_before = mutual_information(&joint, dx, dx);
    let mut joint_after = vec![0.0; gamma.rows * dx];
    for y in 0..dx {
        // column of the joint conditioned on the copy value y
        let col: Vec<f64> = (0..dx).map(|x| joint[x * dx + y]).collect();
        let mapped = gamma.apply(&col)?;
        for (xp, v) in mapped.iter().enumerate() {
            joint_after[xp * dx + y] = *v;
        }
    }
    let mutual_after = mutual_information(&joint_after, gamma.rows, dx);
    let eps = 1e-12;
    let all_contract = trace_after <= trace_before + eps
        && (rel_entropy_before.is_infinite() || rel_entropy_after <= rel_entropy_before + eps)
        && mutual_after <= mutual_before + eps;
    Ok(DpiReport {
        trace_before,
        trace_after,
        rel_entropy_before,
        rel_entropy_after,
        mutual_before,
        mutual_after,
        all_contract,
    })
}

/// The Euclidean norm does not satisfy the data-processing inequality:
/// attach a uniformly distributed second bit and discard it. Returns the
/// initial and final Euclidean distances; every entry of the initial joint
/// difference is exactly half the corresponding marginal difference, yet the
/// distance grows under the discard map.
pub fn euclidean_counterexample(p: &[f64], q: &[f64]) -> (f64, f64, f64) {
    let d = p.len();
    let mut pj = vec![0.0; 2 * d];
    let mut qj = vec![0.0; 2 * d];
    for x in 0..d {
        for b in 0..2 {
            pj[x * 2 + b] = p[x] / 2.0;
            qj[x * 2 + b] = q[x] / 2.0;
        }
    }
    let before = euclidean_distance(&pj, &qj);
    let after = euclidean_distance(p, q);
    // componentwise factor between joint and marginal differences
    let mut max_factor_dev: f64 = 0.0;
    for x in 0..d {
        let marg = p[x] - q[x];
        for b in 0..2 {
            let joint = pj[x * 2 + b] - qj[x * 2 + b];
            max_factor_dev = max_factor_dev.max((joint - 0.5 * marg).abs());
        }
    }
    (before, after, max_factor_dev)
}

/// Random distribution with entries bounded away from zero.
pub fn random_distribution(rng: &mut impl rand::Rng, d: usize) -> Vec<f64> {
    let mut p: Vec<f64> = (0..d).map(|_| rng.gen_range(0.01..1.0)).collect();
    let s: f64 = p.iter().sum();
    for x in p.iter_mut() {
        *x /= s;
    }
    p
}

/// Random column-stochastic matrix.
pub fn random_stochastic(rng: &mut impl rand::Rng, rows: usize, cols: usize) -> StochMatrix {
    let mut data = vec![0.0; rows * cols];
    for c in 0..cols {
        let col = random_distribution(rng, rows);
        for r in 0..rows {
            data[r * cols + c] = col[r];
        }
    }
    StochMatrix::new(rows, cols, data).unwrap()
}

/// Die faces are indexed 0..6 for pips 1..=6; opposite faces sum to 7.
fn opposite_face(f: usize) -> usize {
    5 - f
}

/// Fully random die: every column is the single-toss distribution.
pub fn random_process_die(weights: &[f64; 6]) -> Result<StochMatrix> {
    let sum: f64 = weights.iter().sum();
    if weights.iter().any(|&w| w < 0.0) || (sum - 1.0).abs() > 1e-12 {
        return Err(Error::BadDistribution(format!("die weights sum to {sum}")));
    }
    let mut data = vec![0.0; 36];
    for r in 0..6 {
        for c in 0..6 {
            data[r * 6 + c] = weights[r];
        }
    }
    StochMatrix::new(6, 6, data)
}

pub fn fair_die() -> StochMatrix {
    random_process_die(&[1.0 / 6.0; 6]).unwrap()
}

/// Gently perturbed die: stays with probability p, rolls to the opposite
/// face with probability s, tips to any adjacent face with probability q,
/// subject to p + 4q + s = 1 and p > q >> s.
pub fn perturbed_die(p: f64, q: f64, s: f64) -> Result<StochMatrix> {
    if (p + 4.0 * q + s - 1.0).abs() > 1e-12 || p <= q || q <= s || s < 0.0 {
        return Err(Error::BadParam(format!(
            "perturbed die needs p + 4q + s = 1 and p > q > s, got ({p}, {q}, {s})"
        )));
    }
    let mut data = vec![0.0; 36];
    for c in 0..6 {
        for r in 0..6 {
            data[r * 6 + c] = if r == c {
                p
            } else if r == opposite_face(c) {
                s
            } else {
                q
            };
        }
    }
    StochMatrix::new(6, 6, data)
}

/// Default perturbed-die parameters (the defining inequalities leave them
/// free).
pub fn perturbed_die_default() -> StochMatrix {
    perturbed_die(0.5, 0.115, 0.04).unwrap()
}

/// Escalating die: one transition matrix per count mu of unchanged tosses,
/// interpolating from the gentle perturbation to the fully random toss.
/// The interpolation weights are exposed because only their ordering is
/// canonical; mu = 3 must reach the fully random process.
pub fn escalating_die(p: f64, q: f64, s: f64, weights: [f64; 4]) -> Result<Vec<StochMatrix>> {
    if weights[3] != 1.0 {
        return Err(Error::BadParam(
            "the final escalation must reach the fully random process".into(),
        ));
    }
    let base = perturbed_die(p, q, s)?;
    let uniform = fair_die();
    weights
        .iter()
        .map(|&w| {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::BadParam(format!("weight {w} outside [0, 1]")));
            }
            let data: Vec<f64> = base
                .data
                .iter()
                .zip(&uniform.data)
                .map(|(b, u)| (1.0 - w) * b + w * u)
                .collect();
            StochMatrix::new(6, 6, data)
        })
        .collect()
}

pub fn escalating_die_default() -> Vec<StochMatrix> {
    escalating_die(0.5, 0.115, 0.04, [0.0, 0.25, 0.5, 1.0]).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoinInstrument {
    /// Flip the coin after reading it.
    Flip,
    /// Leave the coin as found.
    Identity,
    /// Always set the coin to tails.
    Reset,
}

/// Two-time statistics of the perturbed coin with an active intervention at
/// the first measurement. The coin starts on heads (index 0) and flips with
/// probability p on each perturbation.
pub fn coin_with_interventions(p: f64, instrument: CoinInstrument) -> Result<JointDist> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::BadParam(format!("flip probability {p}")));
    }
    let perturb = |state: usize| -> [f64; 2] {
        let mut out = [0.0; 2];
        out[state] = 1.0 - p;
        out[1 - state] = p;
        out
    };
    let mut probs = vec![0.0; 4];
    let first = perturb(0);
    for f1 in 0..2usize {
        let after = match instrument {
            CoinInstrument::Flip => 1 - f1,
            CoinInstrument::Identity => f1,
            CoinInstrument::Reset => 1,
        };
        let second = perturb(after);
        for f2 in 0..2usize {
            probs[f1 * 2 + f2] += first[f1] * second[f2];
        }
    }
    JointDist::new(vec![2, 2], probs)
}

/// Four-bit parity process: three fair bits followed by their parity. The
/// joint mass is 1/8 on even-parity quadruples and 0 otherwise.
pub fn parity_process() -> JointDist {
    let mut probs = vec![0.0; 16];
    for x1 in 0..2usize {
        for x2 in 0..2usize {
            for x3 in 0..2usize {
                let x4 = (x1 + x2 + x3) % 2;
                probs[((x1 * 2 + x2) * 2 + x3) * 2 + x4] = 1.0 / 8.0;
            }
        }
    }
    JointDist::new(vec![2, 2, 2, 2], probs).unwrap()
}

/// Long-range memory: s i.i.d. uniform times, then an outcome correlated
/// with the one s steps back, P(x_t | x_{t-s}) = p delta + (1 - p)/d.
pub fn long_memory(p: f64, s: usize, d: usize) -> Result<JointDist> {
    if !(0.0..=1.0).contains(&p) || s == 0 || d < 2 {
        return Err(Error::BadParam(format!(
            "long memory needs p in [0,1], s >= 1, d >= 2; got ({p}, {s}, {d})"
        )));
    }
    let times = s + 1;
    let n = d.pow(times as u32);
    let base = 1.0 / (d.pow(s as u32) as f64);
    let mut probs = vec![0.0; n];
    let dims = vec![d; times];
    let mut idx = vec![0usize; times];
    for (flat, slot) in probs.iter_mut().enumerate() {
        decompose(flat, &dims, &mut idx);
        let cond = if idx[s] == idx[0] { p + (1.0 - p) / d as f64 } else { (1.0 - p) / d as f64 };
        *slot = base * cond;
    }
    JointDist::new(dims, probs)
}
