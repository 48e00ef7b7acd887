//! Compressed-sensing photoacoustic tomography: forward simulation, detector
//! sampling, l1-analysis reconstruction and numerical certificates.

pub mod config;
pub mod diagnostics;
pub mod digest;
pub mod error;
pub mod geom;
pub mod io;
pub mod l1solve;
pub mod quad;
pub mod rng;
pub mod runner;
pub mod sensing;
pub mod spheregeom;
pub mod wavefield;
pub mod wavelet3d;

pub use error::{PatError, Result};
