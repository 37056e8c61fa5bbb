//! Simulation and verification toolkit for branching-coalescing particle systems.
//!
//! Coalescing random walks and Brownian motions, Feller and squared Bessel mass
//! dynamics, the measure-valued particle systems built from them, exact duality
//! oracles, and quadrature for the closed-form laws of the limiting process.

pub mod branchkit;
pub mod closedform;
pub mod contcoal;
pub mod error;
pub mod harness;
pub mod latticecoal;
pub mod partition;
pub mod randkit;
pub mod scsm;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
