//! Numerical helpers: adaptive integration, small Hermitian eigenproblems,
//! Bessel J0.

pub mod bessel;
pub mod linalg;
pub mod ode;
