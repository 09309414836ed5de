//! Quantum reservoir computing on two parametrically coupled, dissipative
//! quantum oscillators (a Josephson mixer), with the classical reservoirs it is
//! benchmarked against.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, configuration
//! and the command-line driver live in the `qrc` crate.

#![no_std]
// NaN must fail range checks, so they are written as `!(x > 0.0)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
extern crate alloc;

pub mod baselines;
pub mod error;
pub mod fock;
pub mod lindblad;
pub mod mixer;
pub mod readout;
pub mod tasks;

pub use error::{Error, Result};

/// Complex scalar used for all operators and states.
pub type C64 = num_complex::Complex<f64>;
