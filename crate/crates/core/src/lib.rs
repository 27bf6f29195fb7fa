//! Entropy-monitored random number generation from high-dimensional
//! time-energy entanglement.
//!
//! The crate is organised along the data flow of one run:
//!
//! * [`sim`] produces time-tag streams for a cw-pumped entangled-photon
//!   source seen through imperfect detectors, plus Franson fringe scans.
//! * [`protocol`] splits detections into generation/test rounds, frames the
//!   generation detections into `N_d`-ary symbols and applies the abort rule.
//! * [`entropy`] turns the observed visibility into a certified min-entropy
//!   per symbol, including the finite-size penalty and the accidentals
//!   discount.
//! * [`extractor`] hashes raw symbols with a seeded GF(2) Toeplitz matrix.
//! * [`stattests`] runs a small statistical battery over the output.
//! * [`pipeline`] and [`io`] glue the stages together through files.

pub mod bits;
pub mod config;
pub mod entropy;
pub mod error;
pub mod extractor;
pub mod io;
pub mod pipeline;
pub mod protocol;
pub mod rng;
pub mod sim;
pub mod stattests;

pub use bits::BitString;
pub use error::{Error, Result};
