//! Simulation of polarization-entangled photon pairs distributed over DWDM
//! channels: channel spectra and quality factors, the noisy two-qubit state
//! and its CHSH parameter, analytic coincidence budgets, and an event-level
//! Monte Carlo of the gated detection chain.

pub mod counting;
pub mod error;
pub mod montecarlo;
pub mod quadrature;
pub mod quantum;
pub mod spectral;

pub use error::{Error, Result};
