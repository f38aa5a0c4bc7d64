//! Reactive settling in a sequencing batch reactor.
//!
//! The mixture column is mapped onto a fixed unit interval and advanced by an
//! explicit monotone finite-volume scheme or a semi-implicit variant whose time
//! step does not shrink quadratically with the grid.

pub mod biokinetics;
pub mod config;
pub mod constitutive;
pub mod discretization;
pub mod error;
pub mod explicit_scheme;
pub mod mixing_ode;
pub mod properties;
pub mod scenario;
pub mod semi_implicit;
pub mod simulator;
pub mod state;
pub mod tridiag;
pub mod validation;

#[cfg(test)]
mod test_support;

pub use error::{ConfigError, RunError, SimulationError, StepError};
