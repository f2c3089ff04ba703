//! Linear attitude dynamics of a prolate dual-spin satellite, its classical
//! de-spin motor feedback loops, and orbit-driven time-varying simulation.
//!
//! The crate is organised bottom-up:
//!
//! - [`dynamics`] builds and validates the 6-state stability-axes plant.
//! - [`orbit`] propagates the two-body orbit that modulates the plant.
//! - [`control`] realizes compensators, closes loops and sweeps root loci.
//! - [`simulator`] integrates the closed loop under reference and orbit forcing.
//! - [`analysis`] extracts settling times, envelopes, periods and budget verdicts.
//! - [`cli`] binds JSON configs and CSV outputs to the `dualspin` binary.

pub mod analysis;
pub mod cli;
pub mod control;
pub mod dynamics;
mod error;
pub mod orbit;
pub mod presets;
pub mod simulator;

pub use error::{Error, Result};

/// Degrees to radians.
pub fn deg_to_rad(deg: f64) -> f64 {
    deg.to_radians()
}

/// Radians to degrees.
pub fn rad_to_deg(rad: f64) -> f64 {
    rad.to_degrees()
}
