//! Conductor electrostatics with point charges and closed-form image
//! solutions.
//!
//! * [`geometry`]: conductor domains, signed distance, normals, sphere
//!   inversion and the ring lattice on a sphere.
//! * [`pointcharge`]: pair energy, Coulomb forces and static-state checks.
//! * [`equilibrium`]: constrained multi-start energy minimization.
//! * [`imagecharge`]: two-ball image series and nested-shell charges.
//! * [`fieldscan`]: Coulomb/Yukawa potentials, segment profiles, flux
//!   quadrature, voxel level sets and the gyration curve.
//!
//! Units are Gaussian with the Coulomb constant set to 1.

pub mod equilibrium;
pub mod error;
pub mod fieldscan;
pub mod geometry;
pub mod imagecharge;
pub mod io;
pub mod parallel;
pub mod pointcharge;

pub use error::{FieldError, Result};

/// Positions, forces and normals.
pub type Vec3 = nalgebra::Vector3<f64>;
