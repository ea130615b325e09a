//! Particle simulation of a mean-field Langevin system in its large-friction
//! scaling, the first-order limit equation it converges to, and numerical
//! checks of every constant in the `O(1/β)` strong-error bound.

pub mod error;
pub mod kernels;
pub mod noise;
pub mod stats;
pub mod ensemble;
pub mod coupling;
pub mod bounds;
pub mod scaling;
pub mod experiments;
pub mod config;
pub mod cli;

pub use error::{Error, Result};
