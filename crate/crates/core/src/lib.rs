//! Numerical laboratory for the compressible Navier-Stokes-Poisson system in
//! the exterior of a ball: steady states by monotone iteration, radially
//! symmetric perturbation dynamics, energy/dissipation functionals, and
//! empirical checks of the functional inequalities behind the stability
//! argument.

pub mod domain;
pub mod elliptic;
pub mod energy;
pub mod error;
pub mod evolve;
pub mod ineqlab;
pub mod params;
pub mod steady;
pub mod tridiag;

pub use error::{NspError, Result};
pub use params::FluidParams;
