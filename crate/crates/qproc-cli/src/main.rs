//! Command-line front end: paper-model demos, process construction, checks,
//! tomography runs, witnesses, and memory reports.
//!
//! Exit codes: 0 on success, 1 on usage or input errors, 2 when a check
//! fails.

mod commands;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "qproc", version, about = "Classical and quantum stochastic process toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a built-in demonstration and emit its report.
    Demo {
        /// One of: shallow-pocket, stern-gerlach, initial-correlations,
        /// classical-coin, classical-parity, classical-perturbed-die,
        /// classical-escalating-die, classical-long-memory, classical-dpi
        name: String,
        #[arg(long, default_value_t = 2.0)]
        gamma_t: f64,
        #[arg(long, default_value_t = 0.7)]
        omega_t: f64,
        #[arg(long, default_value_t = 0.5)]
        g: f64,
        #[arg(long, default_value_t = 0.3)]
        a1: f64,
        #[arg(long, default_value_t = 0.2)]
        a2: f64,
        #[arg(long, default_value_t = 0.4)]
        a3: f64,
        #[arg(long, default_value_t = 0.3)]
        p: f64,
        #[arg(long, default_value_t = 2)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<String>,
        #[arg(long, default_value = "json")]
        format: String,
    },
    /// Build a process tensor and write it as JSON.
    Build {
        /// One of: shallow-pocket, stern-gerlach, markov-dephasing,
        /// random-circuit
        model: String,
        #[arg(long, default_value_t = 1.0)]
        gamma_t: f64,
        #[arg(long, default_value_t = 2)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: String,
    },
    /// Verify a property of a stored object; exits 2 when the check fails.
    Check {
        /// One of: cp, tp (channel files); causality, markov, order
        /// (process files)
        what: String,
        #[arg(long = "in")]
        input: String,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// History/memory factor counts for the order check.
        #[arg(long, default_value_t = 2)]
        h: usize,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long)]
        out: Option<String>,
    },
    /// Contract a stored process tensor with a sequence of operations.
    Contract {
        #[arg(long = "in")]
        input: String,
        /// JSON list of channels, one per full (i, o) time in order.
        #[arg(long)]
        ops: String,
        /// JSON density matrix fed into a leading preparation slot.
        #[arg(long)]
        prep: Option<String>,
        /// JSON effect measured at the final slot; omitted = leave open.
        #[arg(long)]
        effect: Option<String>,
        #[arg(long)]
        out: Option<String>,
    },
    /// Seeded tomography roundtrips; the report carries the worst error.
    Tomo {
        /// One of: state, channel, process
        what: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        #[arg(long)]
        out: Option<String>,
    },
    /// Non-Markovianity witnesses.
    Witness {
        /// One of: blp, divisor, snapshot
        what: String,
        /// Model family: dephasing, xz, unitary, shallow-pocket
        #[arg(long, default_value = "dephasing")]
        model: String,
        #[arg(long, default_value_t = 1.0)]
        gamma_t: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 0.4)]
        s: f64,
        #[arg(long, default_value_t = 10)]
        steps: usize,
        /// Apply a sigma_x instrument at the middle time (shallow pocket).
        #[arg(long, default_value_t = false)]
        intervene_x: bool,
        #[arg(long)]
        out: Option<String>,
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Memory analysis of a stored process tensor.
    Memory {
        /// Currently only `report`.
        what: String,
        #[arg(long = "in")]
        input: String,
        /// Split specification, e.g. --split F=2 M=1 H=0 (counts of times).
        #[arg(long, num_args = 1..=3)]
        split: Vec<String>,
        #[arg(long, default_value_t = 1.0)]
        schatten_p: f64,
        #[arg(long)]
        out: Option<String>,
    },
}

fn main() {
    let threads = std::env::var("QPROC_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    qproc::par::configure_threads(threads);
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => match e.kind() {
            // help and version are successes; anything else is a usage error
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                print!("{e}");
                std::process::exit(0);
            }
            _ => {
                eprint!("{e}");
                std::process::exit(1);
            }
        },
    };
    let code = match commands::run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    };
    std::process::exit(code);
}
