//! Free-space wave propagation: periodic spectral propagator, sphere
//! restriction, Kirchhoff point oracle and exact spherical-means traces.

pub mod grid;
pub mod interp;
pub mod kirchhoff;
pub mod propagate;
pub mod radial;
pub mod spectral;
pub mod trace;

pub use grid::{Grid3, ScalarField3};
pub use propagate::TimeGrid;
pub use radial::{AtomTraceBatch, Factor, RadialEngine, SeparableTerm};
pub use trace::{forward_trace, TraceOptions, TraceSource, TraceTable};
