//! Propagation of nanofiber-guided light through a periodic array of
//! multilevel atoms.

pub mod array;
pub mod atoms;
pub mod bandgap;
pub mod constants;
pub mod emission;
pub mod error;
pub mod fiber;
pub mod numerics;
pub mod radiation;
pub mod scattering;
pub mod selfcheck;

pub use error::{Error, Result};

/// Crate version, reported in output metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
