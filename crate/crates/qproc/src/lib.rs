//! Numerical toolkit for classical and quantum stochastic processes.
//!
//! The crate is organized around a dense complex matrix type with
//! tensor-factor bookkeeping ([`qla::CMatrix`]) and builds up from there:
//!
//! - [`qla`]: linear-algebra kernel, entropies, distances, matrix functions;
//! - [`channels`]: quantum channels in Kraus, Choi, and superoperator form;
//! - [`tomo`]: POVMs, instruments, dual frames, linear-inversion tomography;
//! - [`proctensor`]: multi-time process tensors, the link product, causality,
//!   conditioning, and process reconstruction;
//! - [`memory`]: Markovianity decisions and non-Markovianity measures;
//! - [`classical`]: classical joint distributions, stochastic matrices, and
//!   hidden Markov embeddings.
//!
//! Heavy loops (tomography sweeps, randomized property suites) run on rayon
//! when the default `parallel` feature is enabled and fall back to sequential
//! iteration otherwise.

pub mod channels;
pub mod classical;
pub mod error;
pub mod memory;
pub mod par;
pub mod proctensor;
pub mod qla;
pub mod random;
pub mod tomo;

pub use error::{Error, Result};
