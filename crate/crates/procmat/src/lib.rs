//! Process matrices on time-delocalised subsystems.
//!
//! The crate is organised around a small dense tensor core with named,
//! dimensioned indices (`tensor`), on top of which sit:
//!
//! - `process` — process vectors/matrices, the generalised Born rule,
//!   unitary extensions and a catalog of reference processes;
//! - `circuit` — an acyclic temporal-circuit IR with a pure-Choi simulator,
//!   comb and quantum-controlled-order circuit builders;
//! - `delocal` — no-influence factorizations, the isomorphisms that define
//!   time-delocalised subsystems, fragment rewriting and the cyclic
//!   reconstruction checks;
//! - `classical` — exact classical instruments, classicalization of
//!   basis-preserving circuits and time-delocalised classical variables;
//! - `bw` — the explicit Araújo–Feix / Baumeler–Wolf realisation and the
//!   causal-inequality demo;
//! - `causality` — correlations, causal inequalities, causal-polytope
//!   vertex enumeration and exact membership, strict partial orders.

pub mod bw;
pub mod causality;
pub mod circuit;
pub mod classical;
pub mod delocal;
pub mod io;
pub mod laws;
pub mod process;
pub mod rng;
pub mod tensor;

pub use tensor::{
    identity_dket, pure_choi, LabeledOperator, LabeledTensor, SystemLabel, TensorError,
    UnitaryBlock, C64, DEFAULT_TOL,
};
