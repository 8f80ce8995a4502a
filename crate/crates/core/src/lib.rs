//! Gibbs measures, cutoff nonlinear Schrödinger flows and the statistical
//! checks that connect them.

pub mod cli;
pub mod error;
pub mod field_sampler;
pub mod flow;
pub mod gibbs;
pub mod grid;
pub mod linalg;
pub mod numerics;
pub mod report;
pub mod rng;
pub mod spaces;
pub mod spectral;
pub mod stats;
pub mod suite;

pub use error::{Error, Result};
pub use grid::{Grid1D, LatticeField};
pub use rng::SeedStream;
