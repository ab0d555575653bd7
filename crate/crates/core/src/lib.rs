//! Classical and quantum simulator memory for Ising chains with
//! finite-range power-law couplings.
//!
//! The pipeline runs [`model`] (transfer matrix) → [`classical`] (unifilar
//! generator, statistical complexity) → [`quantum`] (signal-state Gram
//! matrix, von Neumann entropy) → [`analysis`] (sweeps and fits). [`oracle`]
//! enumerates short chains exactly and is used to check the generator.

pub mod analysis;
pub mod classical;
pub mod cli;
pub mod error;
pub mod model;
pub mod oracle;
pub mod output;
pub mod quantum;
pub mod spectral;

pub use error::{Error, Result};
