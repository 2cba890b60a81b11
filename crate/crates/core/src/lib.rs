//! Holomorphic quantization on flat manifolds.
//!
//! Square-integrable holomorphic functions on the cotangent bundle of a flat
//! configuration space are pulled back to the tangent space of the phase
//! space through the exponential map and paired against the Gaussian measure
//! `e^{-|z|^2} dz`. On top of that pairing the crate builds Gram matrices,
//! orthonormal systems, reproducing kernels, ladder operators and a
//! short-time propagator, with the circle (phase space: the cylinder) as the
//! fully worked reference model.
//!
//! Module map:
//!
//! * [`geometry`]: flat charts, exponential map, complex tangent coordinates.
//! * [`quadrature`]: tensor Gauss-Hermite rules on the tangent space.
//! * [`bargmann`]: bases, Gram data, kernels, projections, operator kernels.
//! * [`cylinder`]: the `S^1` model and its heat-kernel representation.
//! * [`operators`]: ladder operators and the free Hamiltonian.
//! * [`propagator`]: infinitesimal evolution, iteration, Green functions.
//! * [`io`], [`cli`], [`acceptance`]: file formats, the command line, and the
//!   numerical acceptance checks shared by the test suite and `validate`.

pub mod acceptance;
pub mod bargmann;
pub mod cli;
pub mod cylinder;
pub mod defaults;
pub mod error;
pub mod geometry;
pub mod io;
pub mod operators;
pub mod propagator;
pub mod quadrature;

pub use error::{Error, Result};
pub use num_complex::Complex64;
