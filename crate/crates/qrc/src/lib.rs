//! Experiment runner for the two-oscillator quantum reservoir: configuration
//! files, dataset caching, run bundles, sweeps and the invariant suites.

// NaN must fail range checks, so they are written as `!(x > 0.0)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod error;
pub mod io;
pub mod run;
pub mod sweep;
pub mod validate;

pub use config::ExperimentConfig;
pub use error::{QrcError, Result};
