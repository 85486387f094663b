//! Plane-wavelet phase-space basis and the difference kinetic equations built
//! on it.
//!
//! The single-particle states are cells of width `d` carrying quantized
//! momenta `K = 2πn/d`. On that lattice the kinetic (Boltzmann) equation
//! becomes a difference equation: gradients in position and momentum are
//! replaced by shift-operator stencils. This crate provides
//!
//! - [`grid_basis`]: the lattice, the wavelets and their analytic inner
//!   products, expansions and matrix elements, with quadrature oracles;
//! - [`difference_ops`]: shift operators, drift and streaming stencils and a
//!   spectral differentiation oracle;
//! - [`kinetic_terms`]: right-hand sides of the difference Boltzmann equation,
//!   the classical Boltzmann equation, the collision integral and the
//!   mean-field polarization-matrix equation;
//! - [`evolution`]: explicit time stepping with conservation diagnostics;
//! - [`cli_io`]: scenario configs, CSV output and the batch commands.
//!
//! Natural units `ħ = m = q = 1` are used throughout.

pub mod cli_io;
pub mod difference_ops;
pub mod error;
pub mod evolution;
pub mod grid_basis;
pub mod kinetic_terms;
pub mod quadrature;

pub use error::{Error, Result};
pub use grid_basis::{GridSpec, WaveletIndex};
pub use num_complex::Complex64;
