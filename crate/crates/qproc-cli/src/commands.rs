use crate::Command;
use anyhow::{anyhow, bail, Context, Result};
use qproc::channels::{channel_factory, xz_example1_choi, Channel, ChannelKind};
use qproc::classical::{
    cmi, coin_with_interventions, dpi_suite, escalating_die_default, euclidean_counterexample,
    long_memory, markov_order_estimate, parity_process, perturbed_die_default, recovery_error,
    CoinInstrument,
};
use qproc::memory::{
    blp_family, blp_on_two_step, infer_divisor, is_markov, markov_order_test, memory_report,
    mpo_bond_dims, nonmarkov_rel_entropy, snapshot_generator,
};
use qproc::proctensor::{
    collect_probs, initial_correlations_superchannel, markov_tensor,
    process_from_circuit, reconstruct_process, shallow_pocket, shallow_pocket_compressed,
    stern_gerlach_tensor, CircuitProcess, ProcessTensor, SlotBasis, SlotDir, TimeOp,
};
use qproc::qla::{cr, herm_eig, pauli, q_mutual_info, qubit_ket, CMatrix};
use qproc::random::{random_density, random_unitary, rng_from_seed};
use qproc::tomo::{channel_tomography, qubit_state_basis, random_ic_povm, state_tomography};
use serde::Serialize;
use serde_json::json;

fn emit(payload: &str, out: Option<&str>) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, payload).with_context(|| format!("writing {path}"))?
        }
        None => println!("{payload}"),
    }
    Ok(())
}

fn emit_json<T: Serialize>(value: &T, out: Option<&str>) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    emit(&s, out)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &str) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn run(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Demo {
            name,
            gamma_t,
            omega_t,
            g,
            a1,
            a2,
            a3,
            p,
            steps,
            seed,
            out,
            format,
        } => demo(
            &name,
            DemoParams {
                gamma_t,
                omega_t,
                g,
                a: [a1, a2, a3],
                p,
                steps,
                seed,
            },
            out.as_deref(),
            &format,
        ),
        Command::Build {
            model,
            gamma_t,
            steps,
            seed,
            out,
        } => build(&model, gamma_t, steps, seed, &out),
        Command::Check {
            what,
            input,
            tol,
            h,
            m,
            out,
        } => check(&what, &input, tol, h, m, out.as_deref()),
        Command::Contract {
            input,
            ops,
            prep,
            effect,
            out,
        } => contract(&input, &ops, prep.as_deref(), effect.as_deref(), out.as_deref()),
        Command::Tomo {
            what,
            seed,
            runs,
            out,
        } => tomo(&what, seed, runs, out.as_deref()),
        Command::Witness {
            what,
            model,
            gamma_t,
            t,
            s,
            steps,
            intervene_x,
            out,
            format,
        } => witness(
            &what,
            &model,
            gamma_t,
            t,
            s,
            steps,
            intervene_x,
            out.as_deref(),
            &format,
        ),
        Command::Memory {
            what,
            input,
            split,
            schatten_p,
            out,
        } => memory_cmd(&what, &input, &split, schatten_p, out.as_deref()),
    }
}

struct DemoParams {
    gamma_t: f64,
    omega_t: f64,
    g: f64,
    a: [f64; 3],
    p: f64,
    steps: usize,
    seed: u64,
}

fn demo(name: &str, prm: DemoParams, out: Option<&str>, format: &str) -> Result<i32> {
    if format != "json" && !(format == "csv" && name.starts_with("classical")) {
        bail!("demo reports are JSON (classical demos also export CSV tables)");
    }
    match name {
        "shallow-pocket" => {
            let t = shallow_pocket(prm.gamma_t).map_err(|e| anyhow!(e.to_string()))?;
            let compressed = shallow_pocket_compressed(&t);
            let rho = compressed.scale(cr(0.25));
            let mi = q_mutual_info(&rho, &[0]).map_err(|e| anyhow!(e.to_string()))?;
            let (spectrum, _) = herm_eig(&rho).map_err(|e| anyhow!(e.to_string()))?;
            let (n_r, confusion) = nonmarkov_rel_entropy(&t).map_err(|e| anyhow!(e.to_string()))?;
            let verdict = is_markov(&t, 1e-8).map_err(|e| anyhow!(e.to_string()))?;
            let report = json!({
                "gamma_t": prm.gamma_t,
                "compressed_choi": compressed,
                "mutual_information_nats": mi,
                "mutual_information_bits": mi / std::f64::consts::LN_2,
                "joint_spectrum": spectrum,
                "rel_entropy_measure": n_r,
                "confusion_n_1_10_100": confusion,
                "markov": verdict.markov,
                "causality_pass": t.check_causality().pass,
                "bond_dims": mpo_bond_dims(&t).map_err(|e| anyhow!(e.to_string()))?,
            });
            emit_json(&report, out)?;
            Ok(0)
        }
        "stern-gerlach" => {
            let t = stern_gerlach_tensor();
            let z = [qubit_ket("z+"), qubit_ket("z-")];
            let x = [qubit_ket("x+"), qubit_ket("x-")];
            let zl = ["z+", "z-"];
            let xl = ["x+", "x-"];
            let mut sequences = Vec::new();
            for zi in 0..2 {
                for xi in 0..2 {
                    for zj in 0..2 {
                        let a1 =
                            Channel::from_kraus(vec![CMatrix::projector(&z[zi])]).unwrap();
                        let a2 =
                            Channel::from_kraus(vec![CMatrix::projector(&x[xi])]).unwrap();
                        let pr = t
                            .born_multi(&[
                                TimeOp::Map(&a1),
                                TimeOp::Map(&a2),
                                TimeOp::Effect(CMatrix::projector(&z[zj])),
                            ])
                            .map_err(|e| anyhow!(e.to_string()))?;
                        sequences.push(json!({
                            "outcomes": format!("{},{},{}", zl[zi], xl[xi], zl[zj]),
                            "probability": pr,
                        }));
                    }
                }
            }
            let a1 = Channel::from_kraus(vec![CMatrix::projector(&z[0])]).unwrap();
            let e3 = CMatrix::projector(&z[0]);
            let summed: f64 = (0..2)
                .map(|xi| {
                    let a2 = Channel::from_kraus(vec![CMatrix::projector(&x[xi])]).unwrap();
                    t.born_multi(&[
                        TimeOp::Map(&a1),
                        TimeOp::Map(&a2),
                        TimeOp::Effect(e3.clone()),
                    ])
                    .unwrap()
                })
                .sum();
            let skipped = t
                .born_multi(&[TimeOp::Map(&a1), TimeOp::Identity, TimeOp::Effect(e3)])
                .map_err(|e| anyhow!(e.to_string()))?;
            let report = json!({
                "sequences": sequences,
                "sum_over_middle_outcomes": summed,
                "no_middle_measurement": skipped,
            });
            emit_json(&report, out)?;
            Ok(0)
        }
        "initial-correlations" => {
            let t = initial_correlations_superchannel(prm.a, prm.g, prm.omega_t)
                .map_err(|e| anyhow!(e.to_string()))?;
            let (evals, _) =
                herm_eig(&t.choi.herm_part()).map_err(|e| anyhow!(e.to_string()))?;
            let ex1 = xz_example1_choi(prm.omega_t, prm.g);
            let (ex1_evals, _) = herm_eig(&ex1).map_err(|e| anyhow!(e.to_string()))?;
            // operational Example-2 style map: prepare by projecting onto the
            // state basis, tomograph, report the minimal Choi eigenvalue
            let u = qproc::proctensor::xz_unitary(prm.omega_t);
            let rho_se = qproc::proctensor::xz_initial_state(prm.a, prm.g)
                .map_err(|e| anyhow!(e.to_string()))?;
            let basis = qubit_state_basis();
            let mut inputs = Vec::new();
            let mut outputs = Vec::new();
            for pi in &basis {
                let proj = pi.kron(&CMatrix::identity(&[2]));
                let selected = proj.mul(&rho_se).mul(&proj);
                let w = selected.trace().re;
                if w < 1e-12 {
                    continue;
                }
                let prepared = selected.scale(cr(1.0 / w));
                inputs.push(prepared.partial_trace(&[0]).unwrap());
                let evolved = u.mul(&prepared).mul(&u.dagger());
                outputs.push(evolved.partial_trace(&[0]).unwrap());
            }
            let ex2_min = if inputs.len() == 4 {
                match channel_tomography(&inputs, &outputs) {
                    Ok(ch) => {
                        let (ev, _) = herm_eig(&ch.choi().herm_part())
                            .map_err(|e| anyhow!(e.to_string()))?;
                        Some(ev.last().copied().unwrap_or(0.0))
                    }
                    Err(_) => None,
                }
            } else {
                None
            };
            let report = json!({
                "a": prm.a,
                "g": prm.g,
                "omega_t": prm.omega_t,
                "superchannel": t,
                "superchannel_min_eigenvalue": evals.last().copied().unwrap_or(0.0),
                "causality_pass": t.check_causality().pass,
                "example1_eigenvalues": ex1_evals,
                "example1_is_cp": ex1_evals.last().copied().unwrap_or(0.0) >= -1e-10,
                "example2_operational_min_eigenvalue": ex2_min,
            });
            emit_json(&report, out)?;
            Ok(0)
        }
        "classical-coin" => {
            let flip = coin_with_interventions(prm.p, CoinInstrument::Flip)
                .map_err(|e| anyhow!(e.to_string()))?;
            let idn = coin_with_interventions(prm.p, CoinInstrument::Identity)
                .map_err(|e| anyhow!(e.to_string()))?;
            let reset = coin_with_interventions(prm.p, CoinInstrument::Reset)
                .map_err(|e| anyhow!(e.to_string()))?;
            if format == "csv" {
                let csv = qproc::classical::conditional_table_csv(&flip, 1)
                    .map_err(|e| anyhow!(e.to_string()))?;
                emit(&csv, out)?;
                return Ok(0);
            }
            let report = json!({
                "p": prm.p,
                "flip_joint": flip,
                "identity_joint": idn,
                "reset_joint": reset,
                "p_heads_second_flip": flip.marginalize(&[1]).unwrap().probs[0],
                "p_heads_second_identity": idn.marginalize(&[1]).unwrap().probs[0],
                "expected_flip": 2.0 * prm.p * (1.0 - prm.p),
                "expected_identity": (1.0 - prm.p).powi(2) + prm.p * prm.p,
            });
            emit_json(&report, out)?;
            Ok(0)
        }
        "classical-parity" => {
            let j = parity_process();
            if format == "csv" {
                let csv = qproc::classical::conditional_table_csv(&j, 3)
                    .map_err(|e| anyhow!(e.to_string()))?;
                emit(&csv, out)?;
                return Ok(0);
            }
            let report = json!({
                "joint": j,
                "markov_order": markov_order_estimate(&j).map_err(|e| anyhow!(e.to_string()))?,
                "cmi_memory_2": cmi(&j, 1, 2).map_err(|e| anyhow!(e.to_string()))?,
                "recovery_error_memory_2": recovery_error(&j, 1, 2).map_err(|e| anyhow!(e.to_string()))?,
                "pair_01": j.marginalize(&[0, 1]).unwrap(),
            });
            emit_json(&report, out)?;
            Ok(0)
        }
        "classical-perturbed-die" => {
            let g = perturbed_die_default();
            let report = json!({
                "matrix": g,
                "bistochastic": g.is_bistochastic(),
            });
            emit_json(&report, out)?;
            Ok(0)
        }
        "classical-escalating-die" => {
            let mats = escalating_die_default();
            let report = json!({ "matrices": mats });
            emit_json(&report, out)?;
            Ok(0)
        }
        "classical-long-memory" => {
            let j = long_memory(prm.p.max(0.05), prm.steps.max(1), 2)
                .map_err(|e| anyhow!(e.to_string()))?;
            let report = json!({
                "joint": j,
                "markov_order": markov_order_estimate(&j).map_err(|e| anyhow!(e.to_string()))?,
            });
            emit_json(&report, out)?;
            Ok(0)
        }
        "classical-dpi" => {
            let mut rng = rng_from_seed(prm.seed);
            let d = 3usize;
            let p = qproc::classical::random_distribution(&mut rng, d);
            let q = qproc::classical::random_distribution(&mut rng, d);
            let g = qproc::classical::random_stochastic(&mut rng, d, d);
            let dpi = dpi_suite(&p, &q, &g).map_err(|e| anyhow!(e.to_string()))?;
            let (before, after, factor_dev) = euclidean_counterexample(&p, &q);
            let report = json!({
                "seed": prm.seed,
                "dpi": dpi,
                "euclidean_before": before,
                "euclidean_after": after,
                "euclidean_half_factor_deviation": factor_dev,
                "euclidean_violates_dpi": after > before,
            });
            emit_json(&report, out)?;
            Ok(0)
        }
        other => bail!("unknown demo {other}"),
    }
}

fn build(model: &str, gamma_t: f64, steps: usize, seed: u64, out: &str) -> Result<i32> {
    let t = match model {
        "shallow-pocket" => shallow_pocket(gamma_t).map_err(|e| anyhow!(e.to_string()))?,
        "stern-gerlach" => stern_gerlach_tensor(),
        "markov-dephasing" => {
            let mut rng = rng_from_seed(seed);
            let rho = random_density(&mut rng, 2);
            let chain: Vec<Channel> = (0..steps.max(1))
                .map(|_| channel_factory(ChannelKind::Dephasing { gamma_t }).unwrap())
                .collect();
            markov_tensor(&rho, &chain).map_err(|e| anyhow!(e.to_string()))?
        }
        "random-circuit" => {
            let mut rng = rng_from_seed(seed);
            let rho_se = random_density(&mut rng, 4).with_dims(&[2, 2], &[2, 2]).unwrap();
            let unitaries: Vec<CMatrix> = (0..steps.max(1))
                .map(|_| {
                    random_unitary(&mut rng, 4)
                        .with_dims(&[2, 2], &[2, 2])
                        .unwrap()
                })
                .collect();
            process_from_circuit(&CircuitProcess { rho_se, unitaries })
                .map_err(|e| anyhow!(e.to_string()))?
        }
        other => bail!("unknown model {other}"),
    };
    emit_json(&t, Some(out))?;
    Ok(0)
}

fn check(what: &str, input: &str, tol: f64, h: usize, m: usize, out: Option<&str>) -> Result<i32> {
    match what {
        "cp" | "tp" => {
            let ch: Channel = read_json(input)?;
            let (ok, value) = if what == "cp" {
                ch.is_cp().map_err(|e| anyhow!(e.to_string()))?
            } else {
                ch.is_tp().map_err(|e| anyhow!(e.to_string()))?
            };
            emit_json(&json!({ "check": what, "pass": ok, "witness": value }), out)?;
            Ok(if ok { 0 } else { 2 })
        }
        "causality" => {
            let t: ProcessTensor = read_json(input)?;
            let report = t.check_causality();
            let pass = report.pass;
            emit_json(&report, out)?;
            Ok(if pass { 0 } else { 2 })
        }
        "markov" => {
            let t: ProcessTensor = read_json(input)?;
            let verdict = is_markov(&t, tol).map_err(|e| anyhow!(e.to_string()))?;
            let (n_r, confusion) =
                nonmarkov_rel_entropy(&t).map_err(|e| anyhow!(e.to_string()))?;
            let pass = verdict.markov;
            emit_json(
                &json!({
                    "check": "markov",
                    "pass": pass,
                    "distance": verdict.distance,
                    "max_conditional_dev": verdict.max_conditional_dev,
                    "rel_entropy_measure": n_r,
                    "confusion_n_1_10_100": confusion,
                }),
                out,
            )?;
            Ok(if pass { 0 } else { 2 })
        }
        "order" => {
            let t: ProcessTensor = read_json(input)?;
            if m != 1 {
                bail!("the order check probes a single-slot memory block");
            }
            let d = t.slots.get(h).map(|s| s.d).unwrap_or(2);
            let projectors: Vec<CMatrix> = (0..d)
                .map(|x| CMatrix::projector(&CMatrix::basis_ket(d, x)))
                .collect();
            let rep = markov_order_test(&t, h, m, &projectors, tol)
                .map_err(|e| anyhow!(e.to_string()))?;
            let pass = rep.pass;
            emit_json(&rep, out)?;
            Ok(if pass { 0 } else { 2 })
        }
        other => bail!("unknown check {other}"),
    }
}

fn contract(
    input: &str,
    ops_path: &str,
    prep: Option<&str>,
    effect: Option<&str>,
    out: Option<&str>,
) -> Result<i32> {
    let t: ProcessTensor = read_json(input)?;
    let ops: Vec<Channel> = read_json(ops_path)?;
    let prep_mat: Option<CMatrix> = match prep {
        Some(p) => Some(read_json(p)?),
        None => None,
    };
    let effect_mat: Option<CMatrix> = match effect {
        Some(p) => Some(read_json(p)?),
        None => None,
    };
    let times = t.times();
    let mut time_ops: Vec<TimeOp> = Vec::new();
    let mut op_iter = ops.iter();
    for (pos, &time) in times.iter().enumerate() {
        let fs = t.slots_of_time(time);
        if fs.len() == 2 {
            let ch = op_iter
                .next()
                .ok_or_else(|| anyhow!("not enough operations for the slot pairs"))?;
            time_ops.push(TimeOp::Map(ch));
        } else if pos == 0 && t.slots[0].dir == SlotDir::Out {
            let rho = prep_mat
                .clone()
                .ok_or_else(|| anyhow!("tensor expects --prep for its leading slot"))?;
            time_ops.push(TimeOp::Prepare(rho));
        } else if pos + 1 == times.len() {
            match &effect_mat {
                Some(e) => time_ops.push(TimeOp::Effect(e.clone())),
                None => {}
            }
        }
    }
    if effect_mat.is_some() {
        let p = t
            .born_multi(&time_ops)
            .map_err(|e| anyhow!(e.to_string()))?;
        emit_json(&json!({ "probability": p }), out)?;
    } else {
        let state = t
            .output_state(&time_ops)
            .map_err(|e| anyhow!(e.to_string()))?;
        emit_json(&json!({ "output_state": state }), out)?;
    }
    Ok(0)
}

fn tomo(what: &str, seed: u64, runs: usize, out: Option<&str>) -> Result<i32> {
    let mut worst: f64 = 0.0;
    match what {
        "state" => {
            let mut rng = rng_from_seed(seed);
            for k in 0..runs {
                let povm = random_ic_povm(seed.wrapping_add(k as u64), 2)
                    .map_err(|e| anyhow!(e.to_string()))?;
                let rho = random_density(&mut rng, 2);
                let probs = povm.probabilities(&rho).unwrap();
                let rec = state_tomography(&probs, &povm).map_err(|e| anyhow!(e.to_string()))?;
                worst = worst.max(rec.max_abs_diff(&rho));
            }
        }
        "channel" => {
            let basis = qubit_state_basis();
            for k in 0..runs {
                let ch = channel_factory(ChannelKind::RandomCptp {
                    seed: seed.wrapping_add(k as u64),
                    d: 2,
                    rank: 1 + k % 4,
                })
                .unwrap();
                let outputs: Vec<CMatrix> =
                    basis.iter().map(|b| ch.apply(b).unwrap()).collect();
                let rec =
                    channel_tomography(&basis, &outputs).map_err(|e| anyhow!(e.to_string()))?;
                worst = worst.max(rec.choi().max_abs_diff(&ch.choi()));
            }
        }
        "process" => {
            let bases = vec![
                SlotBasis::qubit_ops(),
                SlotBasis::qubit_ops(),
                SlotBasis::qubit_effects(),
            ];
            for k in 0..runs {
                let mut rng = rng_from_seed(seed.wrapping_add(k as u64));
                let rho_se = random_density(&mut rng, 4)
                    .with_dims(&[2, 2], &[2, 2])
                    .unwrap();
                let u1 = random_unitary(&mut rng, 4).with_dims(&[2, 2], &[2, 2]).unwrap();
                let u2 = random_unitary(&mut rng, 4).with_dims(&[2, 2], &[2, 2]).unwrap();
                let t = process_from_circuit(&CircuitProcess {
                    rho_se,
                    unitaries: vec![u1, u2],
                })
                .unwrap();
                let probs = collect_probs(&t, &bases).map_err(|e| anyhow!(e.to_string()))?;
                let rec = reconstruct_process(&probs, &bases, t.slots.clone())
                    .map_err(|e| anyhow!(e.to_string()))?;
                worst = worst.max(rec.choi.max_abs_diff(&t.choi));
            }
        }
        other => bail!("unknown tomography target {other}"),
    }
    let pass = worst <= 1e-8;
    emit_json(
        &json!({ "target": what, "runs": runs, "seed": seed, "worst_error": worst, "pass": pass }),
        out,
    )?;
    Ok(if pass { 0 } else { 2 })
}

#[allow(clippy::too_many_arguments)]
fn witness(
    what: &str,
    model: &str,
    gamma_t: f64,
    t: f64,
    s: f64,
    steps: usize,
    intervene_x: bool,
    out: Option<&str>,
    format: &str,
) -> Result<i32> {
    match what {
        "blp" => {
            let plus = CMatrix::projector(&qubit_ket("x+"));
            let minus = CMatrix::projector(&qubit_ket("x-"));
            let rep = match model {
                "dephasing" => {
                    let ts: Vec<f64> = (0..=steps)
                        .map(|i| gamma_t * i as f64 / steps.max(1) as f64)
                        .collect();
                    blp_family(
                        &ts,
                        |gt| channel_factory(ChannelKind::Dephasing { gamma_t: gt }),
                        &plus,
                        &minus,
                    )
                    .map_err(|e| anyhow!(e.to_string()))?
                }
                "shallow-pocket" => {
                    let sp = shallow_pocket(gamma_t).map_err(|e| anyhow!(e.to_string()))?;
                    let x = channel_factory(ChannelKind::Unitary(pauli(1))).unwrap();
                    let intervention = if intervene_x { Some(&x) } else { None };
                    blp_on_two_step(&sp, &plus, &minus, intervention)
                        .map_err(|e| anyhow!(e.to_string()))?
                }
                other => bail!("unknown blp model {other}"),
            };
            if format == "csv" {
                let mut text = String::from("t,distance,verdict\n");
                let verdict = if rep.monotone { "monotone" } else { "revival" };
                for (tt, d) in &rep.series {
                    text.push_str(&format!("{tt},{d},{verdict}\n"));
                }
                emit(&text, out)?;
            } else {
                emit_json(&rep, out)?;
            }
            Ok(if rep.monotone { 0 } else { 2 })
        }
        "divisor" => {
            let family = |x: f64| -> Result<Channel> {
                match model {
                    "dephasing" => Ok(channel_factory(ChannelKind::Dephasing { gamma_t: x })
                        .map_err(|e| anyhow!(e.to_string()))?),
                    "xz" => Ok(channel_factory(ChannelKind::XzOscillatory { omega_t: x })
                        .map_err(|e| anyhow!(e.to_string()))?),
                    other => bail!("unknown divisor model {other}"),
                }
            };
            let e_t = family(t)?;
            let e_s = family(s)?;
            match infer_divisor(&e_t, &e_s) {
                Ok((zeta, cp)) => {
                    emit_json(
                        &json!({ "model": model, "t": t, "s": s, "cp": cp, "divisor": zeta.choi() }),
                        out,
                    )?;
                    Ok(if cp { 0 } else { 2 })
                }
                Err(e) => {
                    emit_json(
                        &json!({ "model": model, "t": t, "s": s, "error": e.to_string() }),
                        out,
                    )?;
                    Ok(2)
                }
            }
        }
        "snapshot" => {
            let ch = match model {
                "dephasing" => channel_factory(ChannelKind::Dephasing { gamma_t })
                    .map_err(|e| anyhow!(e.to_string()))?,
                "xz" => channel_factory(ChannelKind::XzOscillatory { omega_t: t })
                    .map_err(|e| anyhow!(e.to_string()))?,
                "unitary" => {
                    let h = pauli(1).scale(qproc::qla::c(0.0, -0.7));
                    channel_factory(ChannelKind::Unitary(
                        qproc::qla::expm(&h).map_err(|e| anyhow!(e.to_string()))?,
                    ))
                    .map_err(|e| anyhow!(e.to_string()))?
                }
                other => bail!("unknown snapshot model {other}"),
            };
            match snapshot_generator(&ch, t, steps.max(2)) {
                Ok(rep) => {
                    let cp = rep.cp_for_all_sampled;
                    emit_json(&rep, out)?;
                    Ok(if cp { 0 } else { 2 })
                }
                Err(e) => {
                    emit_json(
                        &json!({ "model": model, "t": t, "error": e.to_string() }),
                        out,
                    )?;
                    Ok(2)
                }
            }
        }
        other => bail!("unknown witness {other}"),
    }
}

fn memory_cmd(
    what: &str,
    input: &str,
    split: &[String],
    schatten_p: f64,
    out: Option<&str>,
) -> Result<i32> {
    if what != "report" {
        bail!("unknown memory subcommand {what}");
    }
    let t: ProcessTensor = read_json(input)?;
    // parse F=.., M=.., H=.. time counts; default splits the times evenly
    let times = t.times().len();
    let mut f_times = 1usize;
    let mut m_times = 1usize;
    let mut h_times = times.saturating_sub(2);
    for part in split {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| anyhow!("split terms look like F=2"))?;
        let v: usize = value.parse()?;
        match key {
            "F" | "f" => f_times = v,
            "M" | "m" => m_times = v,
            "H" | "h" => h_times = v,
            other => bail!("unknown split key {other}"),
        }
    }
    if f_times + m_times + h_times != times {
        bail!(
            "split F={f_times} M={m_times} H={h_times} does not cover the {times} times of the tensor"
        );
    }
    let ts = t.times();
    let n_h: usize = ts[..h_times]
        .iter()
        .map(|&x| t.slots_of_time(x).len())
        .sum();
    let n_m: usize = ts[h_times..h_times + m_times]
        .iter()
        .map(|&x| t.slots_of_time(x).len())
        .sum();
    let rep = memory_report(&t, n_h, n_m, schatten_p).map_err(|e| anyhow!(e.to_string()))?;
    emit_json(&rep, out)?;
    Ok(0)
}
