//! Hybrid quantum–classical channel noise as a finite Poisson-weighted
//! Gaussian mixture.
//!
//! * [`numkit`]: Poisson mass, Cholesky, Gaussian log-density, log-sum-exp.
//! * [`noise_model`]: the generative model, truncation, sampling and files.
//! * [`em`]: expectation-maximisation fitting with snapshots.
//! * [`capacity`]: capacity formulas, SNR sweeps and curve comparison.

pub mod capacity;
pub mod em;
mod error;
pub mod noise_model;
pub mod numkit;
mod svg;
pub mod textio;

pub use error::{Error, Result};
