//! Energetics, contour geometry and energy certificates for two-dimensional
//! Ising models with nearest-neighbour ferromagnetic coupling and power-law
//! antiferromagnetic interactions.

pub mod error;
pub mod kernel;

pub use error::{Error, Result};
pub use kernel::{ModelParams, SumResult};
pub mod bounds;
pub mod config;
pub mod geometry;
pub mod oracle;
pub mod pairs;
pub mod samples;
pub mod stripes;
