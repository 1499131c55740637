//! Deterministic simulator and verification suite for remote implementation
//! of restricted quantum operations (RIO) over shared GHZ/Bell entanglement.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`]: dense complex matrices, the only numeric kernel.
//! - [`qstate`]: labeled-register state vectors, local operator application,
//!   projective measurement, fidelity, and tensor-factor extraction.
//! - [`permops`]: the swapping-transform algebra (adjacent swaps,
//!   forward/backward rearrangements, block interleavers) as qubit
//!   permutations, with matrix realisations for test-time verification.
//! - [`restricted`]: restricted operator sets `T^r_N(x,t)` — permutation
//!   matrices with phases — their index ↔ permutation bijection, fixed forms
//!   `R_N(x)`, and the shared gate constants.
//! - [`recovery2`]: the catalog of all 24 two-qubit fixed recovery operations
//!   as CNOT/NOT gate sequences, with an evaluator and set verifier.
//! - [`protocol`]: the protocol engine itself — parties as state machines
//!   over a logged classical channel — for the four families (controlled and
//!   combined, one-qubit and N-qubit), each checked branch-by-branch against
//!   a direct-application oracle.

pub mod linalg;
pub mod permops;
pub mod protocol;
pub mod qstate;
pub mod recovery2;
pub mod restricted;
