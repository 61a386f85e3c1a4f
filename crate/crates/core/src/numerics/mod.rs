//! Numerical building blocks shared by the solvers.

pub mod bessel;
pub mod quad;
pub mod roots;
pub mod sum;
