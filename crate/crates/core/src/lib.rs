//! Simulation and diagnostics for axisymmetric incompressible Navier-Stokes flow.

pub mod error;
pub mod exponents;
pub mod fields;
pub mod functionals;
pub mod poisson;
pub mod pressure;
pub mod rescaler;
pub mod cli;
pub mod solver;

pub use error::{Error, Result};
