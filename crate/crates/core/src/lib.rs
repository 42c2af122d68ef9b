//! Numerical laboratory for Madelung quantum hydrodynamics and Fickian
//! diffusion on a periodic 1D grid.
//!
//! - [`grid`]: lattice, spectral derivatives, quadrature
//! - [`madelung`]: density, velocities, Bohm potentials, action
//! - [`schrodinger`]: split-step evolution and energy
//! - [`diffusion`]: exact heat-kernel evolution and residual identities
//! - [`entropy`]: Boltzmann, Fisher, production rates, double-integral entropy
//! - [`analytic`]: closed-form Gaussian references

pub mod analytic;
pub mod diffusion;
pub mod entropy;
pub mod error;
pub mod grid;
pub mod madelung;
pub mod schrodinger;

pub use error::{Error, Result};
pub use grid::{ComplexField, Grid, Mask, MaskedComplexField, MaskedField, RealField};
pub use madelung::QuantumState;
pub use rustfft::num_complex::Complex64;
