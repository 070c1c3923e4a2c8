#![no_std]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod chernoff;
pub mod cluster;
pub mod eigen;
pub mod error;
pub mod pairs;
pub mod rng;
pub mod sampling;
pub mod sbm;
pub mod spectral;

pub use error::{Error, Result};
pub use nalgebra;
