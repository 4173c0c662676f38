//! Numerical model of a deterministic photon-photon controlled-phase-flip
//! gate mediated by a single atom in a one-sided optical cavity.

pub mod calibration;
pub mod cavity;
pub mod config;
pub mod error;
pub mod errors;
pub mod numeric;
pub mod photonsource;
pub mod protocol;
pub mod qcore;
pub mod tomography;

pub use error::{Error, Result};
