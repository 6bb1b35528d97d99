//! Semiclassical squeezing of light in a driven cooperative atom-field system.

pub mod cli_io;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod integrator;
pub mod model;
pub mod sweep;

pub use error::{Error, Result};
