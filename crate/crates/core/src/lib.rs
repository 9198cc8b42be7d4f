//! Calibration of single-photon detector quantum efficiency from heralded
//! photon pairs generated by four-wave mixing in optical fiber.
//!
//! The crate covers the spectral model of the source, the collection
//! efficiency of filters placed on the heralded photon, a seeded Monte Carlo
//! of gated photon counting, the fitting pipeline that turns count records
//! into a quantum-efficiency estimate, and the uncertainty budget of that
//! estimate.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod fit;
pub mod io;
pub mod jsa;
pub mod pipeline;
pub mod quadrature;
pub mod report;
pub mod simulator;
pub mod spectral;
pub mod uncertainty;

pub use error::{Error, Result};
