//! Core library of the fault-tolerance communication laboratory.
//!
//! The crate simulates Clifford circuits under independent Pauli faults,
//! exactly, at the bit level: the concatenated 7-qubit CSS code with
//! Steane-style error correction, teleportation-based encoding and decoding
//! interfaces between bare and encoded qubits, and the effective channel an
//! encoded data qubit experiences when such a pipeline wraps a physical
//! Pauli channel. On top of the simulator sit numerical evaluators for the
//! closed-form capacity and error bounds that govern this construction,
//! plus a small Shannon-theory lab (typical sets, pretty-good measurement,
//! random-codebook packing experiments).
//!
//! Module map:
//! - [`bits`], [`rng`]: GF(2) helpers and deterministic per-trial random streams.
//! - [`pauli`]: Pauli-string algebra and Pauli channels.
//! - [`dense`]: small dense complex operators, Hermitian eigensolver, channels.
//! - [`circuit`]: located circuit diagrams, fault patterns, the i.i.d. noise model.
//! - [`tableau`]: stabilizer-tableau ground-truth engine.
//! - [`frame`]: Pauli-frame (deviation) engine and channel extraction.
//! - [`steane`]: the 7-qubit code, ideal encoder/decoder, EC gadget.
//! - [`gadgets`]: implementations, rectangles, extended rectangles, goodness.
//! - [`interfaces`]: teleportation interfaces and their failure estimation.
//! - [`effective`]: effective-channel extraction and distance reports.
//! - [`bounds`]: entropic functionals, optimizers, closed-form bound evaluators.
//! - [`shannon`]: typicality, PGM, and packing experiments.

pub mod bits;
pub mod rng;
pub mod pauli;
pub mod circuit;
pub mod dense;
pub mod tableau;
pub mod frame;
pub mod steane;
pub mod gadgets;
pub mod interfaces;
pub mod effective;
pub mod bounds;
pub mod shannon;

/// Library-level error conditions with a documented contract.
#[derive(thiserror::Error, Debug)]
pub enum FtError {
    #[error("t_gate locations cannot be simulated: {0}")]
    TGate(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}
