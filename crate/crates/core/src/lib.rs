//! Classical simulator for one squeezed or coherent control mode coupled to a
//! maximally mixed qubit register through the hybrid gate
//! `exp(i x (x) H tau / x0)`.
//!
//! The momentum readout of the control mode is an exact Gaussian mixture
//! over the eigenphases of `H`. On top of that distribution the crate runs
//! phase estimation, normalized-trace estimation and continued-fraction
//! order finding, and keeps the closed-form bounds next to brute-force checks.

// Negated float comparisons double as NaN rejection.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dqc1;
pub mod error;
pub mod estimation;
pub mod factoring;
pub mod hybrid_gate;
pub mod numtheory;
pub mod qumode;
pub mod resources;
pub mod special;
pub mod spectrum;

pub use error::{Error, Result};
