//! Numerical laboratory for Hadamard variations of Laplace spectra and wave
//! traces, and for the infinitesimal spectral rigidity of ellipses.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`] – ellipses, Z₂×Z₂ deformation fields and deformed domains;
//! * [`billiards`] – billiard map, caustic invariant, invariant curves with
//!   their Leray densities, rotation numbers and the length spectrum;
//! * [`spectral`] – Dirichlet/Neumann eigenvalues and boundary Cauchy data by
//!   the method of particular solutions;
//! * [`hadamard`] – eigenvalue, Green's kernel and smoothed wave-trace
//!   variations plus the finite-difference oracle;
//! * [`rigidity`] – Leray integrals, the Abel transform and its moments, the
//!   null-space test and the flatness utilities.

pub mod billiards;
pub mod error;
pub mod geometry;
pub mod hadamard;
pub mod numerics;
pub mod rigidity;
pub mod spectral;

pub use error::{Error, Result};

/// Version string embedded in exported artifacts.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
