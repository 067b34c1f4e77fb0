//! Spectral analysis of the harmonic oscillator coupled to a star graph through
//! the transmission condition `U'(0+, q) - U'(0-, q) = alpha q U(0, q)`.
//!
//! The model reduces to two Jacobi operators acting on `l^2(N_0)`:
//!
//! * `J0(mu)` with diagonal `(2n+1) mu` and off-diagonal `d_n = n^{1/2}(n^2 - 1/4)^{1/4}`,
//! * `J(Lambda; mu)` with the same off-diagonal and diagonal `2 mu y_n(Lambda)`.
//!
//! Modules:
//!
//! * [`special`] closed-form sequences (`zeta_n`, `d_n`, `y_n`, `psi_n`, `eta_n`,
//!   Hermite functions) and the `alpha <-> mu` parameter map;
//! * [`jacobi`] truncated operators, Sturm counts, tridiagonal solves and
//!   singular-value probes;
//! * [`recurrence`] forward and minimal solutions of the three-term recurrences,
//!   Birkhoff-Adams asymptotics and growth fits;
//! * [`weyl`] continued-fraction Weyl functions, spectral density, subordinacy;
//! * [`model`] point spectrum below `1/2`, a.c. multiplicity map and probes;
//! * [`resolvent`] residual verification of the resolvent-difference formula.

pub mod config;
pub mod error;
pub mod jacobi;
pub mod model;
pub mod recurrence;
pub mod resolvent;
pub mod special;
pub mod weyl;

pub use config::NumericConfig;
pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use special::{ModelParameters, SpectralPoint};
