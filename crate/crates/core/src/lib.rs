//! Spectral tools for critical dissipative SQG on the Dirichlet square.

pub mod cli_io;
pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod inequalities;
pub mod operators;
pub mod quadrature;
pub mod regression;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use geometry::Geometry;
pub use spectral::{GridField, NodalField, SpectralField};
