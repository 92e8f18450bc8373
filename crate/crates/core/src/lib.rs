//! Numerical toolkit for narrow-soliton dynamics in the small-dispersion
//! limit of Hopf/KdV-type conservation laws u_t + (f(u))_x + eps^2 u_xxx = 0.
//!
//! The crate provides:
//! - [`mollifiers`]: smoothing kernels, their moments and smeared steps;
//! - [`weakalgebra`]: the finite algebra of narrow-peak asymptotics modulo
//!   second order, with products, composition and coefficient collection;
//! - [`profiles`]: the traveling-wave boundary-value solver for general
//!   polynomial flux, with moments and flux averages;
//! - [`hopf`]: the smooth background by characteristics, with breaking-time
//!   detection;
//! - [`dynamics`]: the four soliton-dynamics systems and the characteristic
//!   transport of the corrective shelf;
//! - [`verify`]: finite-width ansatz assembly, weak-residual pairings and
//!   order fits, a pseudo-spectral dispersive oracle, and the consistency
//!   and ill-posedness demonstrations.

pub mod dynamics;
pub mod flux;
pub mod hopf;
pub mod mollifiers;
pub mod profiles;
pub mod quad;
pub mod verify;
pub mod weakalgebra;
