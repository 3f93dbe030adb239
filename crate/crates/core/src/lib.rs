//! Time-delayed quantum feedback simulated through a Markovian embedding:
//! the delay line is a ring of `n` nonreciprocally coupled, damped
//! oscillators attached to the system at site 0.

// `!(x > 0.0)` is deliberate: it rejects NaN along with the range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod brute;
pub mod config;
pub mod dde;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod linear;
pub mod model;
pub mod mpdo;
pub mod series;
pub mod superop;

pub use error::{Error, Result};
pub use model::{derive_params, kernel_stats, memory_kernel, ChainConfig, DerivedParams, KernelStats};
pub use series::TimeSeries;
