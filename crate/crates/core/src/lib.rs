//! Coupling geometry of binary bipartite networks.
//!
//! The crate extracts multiscale block structure from a 0/1 matrix (two
//! ultrametric trees plus a block grid), generates ensembles of matrices
//! that respect block-level margins, and evaluates nestedness statistics
//! against those ensembles.

pub mod energy;
pub mod ensembles;
pub mod error;
pub mod geometry;
pub mod io;
pub mod model;
pub mod nestedness;
pub mod rng;
pub mod samplers;

pub use error::{Error, Result};
