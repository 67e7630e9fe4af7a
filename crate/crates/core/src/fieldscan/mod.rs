//! Potentials, profiles, flux integrals, level sets and the magnetic
//! trajectory.

pub mod flux;
pub mod levelset;
pub mod potential;
pub mod profile;
pub mod trajectory;

pub use flux::{fibonacci_sphere, gauss_flux, yukawa_flux, FluxResult};
pub use levelset::{
    jagged_sandwich_check, jagged_sandwich_check_at, label_components, lattice_pair, level_components, sample_grid,
    BoundingBox, ComponentSummary, LevelMode, ScalarFieldGrid,
};
pub use potential::{coulomb_gradient, coulomb_potential, yukawa_gradient, yukawa_potential, PotentialSource};
pub use profile::{gap_segment, oscillation, oscillation_at, oscillation_curve, segment_profile, SegmentProfile};
pub use trajectory::magnetic_trajectory;
