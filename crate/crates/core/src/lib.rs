//! Locating and characterizing the chaotic regime of parameterized ODE
//! systems.
//!
//! The crate provides
//! - [`model`]: the system abstraction, divergence screening and search boxes,
//! - [`models`]: built-in chemostat and quadratic-flow systems,
//! - [`integrator`]: fixed-step RK4 for plain and tangent-augmented systems,
//! - [`lyapunov`]: full spectra with horizon doubling and classification,
//! - [`sampler`]: annealed, sigmoid-smoothed Metropolis-Hastings sampling,
//! - [`scan`]: one-parameter bifurcation scans and trajectory export.

pub mod error;
pub mod integrator;
pub mod lyapunov;
pub mod model;
pub mod models;
pub mod sampler;
pub mod scan;

pub use error::{Error, Result};
pub use model::{BoxCoord, CoordKind, SamplePoint, SearchBox, SystemDefinition};
