//! Simulation library for a two-channel (PDD/CP) quantum lock-in amplifier.
//!
//! The crate models a two-level probe driven by a pi-pulse train while an AC
//! signal couples through `sigma_z`, the spectral extraction of the signal's
//! amplitude, frequency and initial phase from the combined two-channel
//! measurement records, and a five-level double-Lambda CPT realization of the
//! same protocol. All operations are pure given their inputs and a seed, so
//! scans can run concurrently without shared state.

pub mod classical;
pub mod cpt;
pub mod error;
pub mod lockin;
pub mod sequence;
pub mod signal;
pub mod spin;
pub mod util;

pub use error::{Error, Result};
