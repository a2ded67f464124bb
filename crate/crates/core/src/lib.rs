//! Simulation of a dual-coupling (linear plus quadratic) optomechanical
//! system: polariton transformation, Lindblad steady states, excitation
//! spectra and equal-time photon correlations.

pub mod config;
pub mod error;
pub mod hilbert;
pub mod lindblad;
pub mod model;
pub mod observables;
pub mod oracle;
pub mod verify;

pub use error::{Error, ErrorKind, Result};
